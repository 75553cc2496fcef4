#include "dogr/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dogr/error.hpp"
#include "dogr/format.hpp"
#include "dogr/numerics.hpp"
#include "dogr/random.hpp"

namespace dogr {

namespace {

using Record = std::vector<std::string>;

std::vector<Record> split_records(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<Record> records;
  Record current;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    current.push_back(std::move(field));
    field.clear();
    const bool blank = current.size() == 1 && current.front().empty() && !field_started;
    if (!blank) records.push_back(std::move(current));
    current.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      current.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
    ++i;
  }
  if (quoted) {
    throw CsvError(CsvError::Kind::malformed, "CSV: unterminated quoted field");
  }
  if (field_started || !field.empty() || !current.empty()) end_record();
  return records;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_decimal(std::string_view cell, double& out) {
  cell = trim(cell);
  if (cell.starts_with('+')) cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

// Fraction of variance of `target` explained by an intercept plus `others`.
double r_squared(const Eigen::VectorXd& target, const Eigen::MatrixXd& others) {
  const Eigen::Index n = target.size();
  const double tss = (target.array() - target.mean()).square().sum();
  if (!(tss > 0.0)) {
    return 1.0;  // constant column is collinear with the intercept
  }
  double rss = 0.0;
  try {
    rss = wls_fit(others, target, Eigen::VectorXd::Ones(n)).weighted_rss;
  } catch (const SingularDesignError&) {
    Eigen::MatrixXd design(n, others.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(others.cols()) = others;
    const Eigen::VectorXd beta = design.completeOrthogonalDecomposition().solve(target);
    rss = (target - design * beta).squaredNorm();
  }
  return 1.0 - rss / tss;
}

}  // namespace

NumericTable parse_numeric_csv(std::string_view text) {
  const auto records = split_records(text);
  if (records.empty()) {
    throw CsvError(CsvError::Kind::empty_file, "CSV: file is empty");
  }
  NumericTable table;
  for (const auto& name : records.front()) table.header.emplace_back(trim(name));
  if (records.size() < 2) {
    throw CsvError(CsvError::Kind::empty_file, "CSV: no data rows after the header");
  }
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  table.values.resize(static_cast<Eigen::Index>(records.size() - 1), cols);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (static_cast<Eigen::Index>(rec.size()) != cols) {
      throw CsvError(CsvError::Kind::malformed,
                     "CSV: row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                         " fields, header has " + std::to_string(cols),
                     r);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_decimal(rec[static_cast<std::size_t>(c)], v)) {
        const std::string& col = table.header[static_cast<std::size_t>(c)];
        throw CsvError(CsvError::Kind::non_numeric,
                       "CSV: non-numeric value '" + rec[static_cast<std::size_t>(c)] + "' at row " +
                           std::to_string(r) + ", column '" + col + "'",
                       r, col);
      }
      table.values(static_cast<Eigen::Index>(r - 1), c) = v;
    }
  }
  return table;
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw CsvError(CsvError::Kind::io, e.what());
  }
  try {
    return parse_numeric_csv(text);
  } catch (const CsvError& e) {
    throw CsvError(e.kind(), path.string() + ": " + e.what(), e.row(), e.column());
  }
}

Dataset dataset_from_table(const NumericTable& table, const std::string& outcome_column) {
  const auto it = std::find(table.header.begin(), table.header.end(), outcome_column);
  if (it == table.header.end()) {
    throw CsvError(CsvError::Kind::missing_column,
                   "CSV: outcome column '" + outcome_column + "' not found", 0, outcome_column);
  }
  const auto outcome_idx = static_cast<Eigen::Index>(it - table.header.begin());
  std::vector<std::string> names;
  std::vector<Eigen::Index> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<Eigen::Index>(c) == outcome_idx) continue;
    names.push_back(table.header[c]);
    cols.push_back(static_cast<Eigen::Index>(c));
  }
  Eigen::MatrixXd x(table.values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = table.values.col(cols[j]);
  }
  return Dataset(std::move(x), table.values.col(outcome_idx), std::move(names), outcome_column);
}

Dataset parse_csv(std::string_view text, const std::string& outcome_column) {
  return dataset_from_table(parse_numeric_csv(text), outcome_column);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& outcome_column) {
  return dataset_from_table(read_numeric_csv(path), outcome_column);
}

std::string dataset_csv(const Dataset& d, int precision) {
  std::ostringstream out;
  for (const auto& name : d.feature_names()) out << csv_field(name) << ',';
  out << csv_field(d.outcome_name()) << '\n';
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      out << format_double(d.features()(i, j), precision) << ',';
    }
    out << format_double(d.outcome()(i), precision) << '\n';
  }
  return out.str();
}

void save_csv(const std::filesystem::path& path, const Dataset& d, int precision) {
  write_file_atomic(path, dataset_csv(d, precision));
}

std::vector<double> variance_inflation_factors(const Eigen::MatrixXd& x) {
  const Eigen::Index p = x.cols();
  std::vector<double> out(static_cast<std::size_t>(p), 1.0);
  if (p < 2) return out;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::MatrixXd others(x.rows(), p - 1);
    for (Eigen::Index c = 0, o = 0; c < p; ++c) {
      if (c != j) others.col(o++) = x.col(c);
    }
    const double r2 = r_squared(x.col(j), others);
    out[static_cast<std::size_t>(j)] = 1.0 - r2 <= kVifCollinearTolerance
                                           ? std::numeric_limits<double>::infinity()
                                           : 1.0 / (1.0 - r2);
  }
  return out;
}

std::pair<Dataset, VifReport> vif_prune(const Dataset& d, double threshold) {
  if (!(threshold >= 1.0)) {
    throw ConfigError("VIF threshold must be at least 1");
  }
  VifReport report;
  report.threshold = threshold;
  std::vector<std::string> names = d.feature_names();
  Eigen::MatrixXd x = d.features();
  while (true) {
    const auto vifs = variance_inflation_factors(x);
    if (names.size() < 2) {
      for (std::size_t j = 0; j < names.size(); ++j) report.kept.push_back({names[j], vifs[j]});
      break;
    }
    std::size_t worst = 0;
    for (std::size_t j = 1; j < names.size(); ++j) {
      if (vifs[j] > vifs[worst] || (vifs[j] == vifs[worst] && names[j] < names[worst])) {
        worst = j;
      }
    }
    if (!(vifs[worst] > threshold)) {
      for (std::size_t j = 0; j < names.size(); ++j) report.kept.push_back({names[j], vifs[j]});
      break;
    }
    report.removed.push_back({names[worst], vifs[worst]});
    names.erase(names.begin() + static_cast<std::ptrdiff_t>(worst));
    Eigen::MatrixXd reduced(x.rows(), x.cols() - 1);
    for (Eigen::Index c = 0, o = 0; c < x.cols(); ++c) {
      if (c != static_cast<Eigen::Index>(worst)) reduced.col(o++) = x.col(c);
    }
    x = std::move(reduced);
  }
  return {d.select_features(names), std::move(report)};
}

std::string vif_report_json(const VifReport& r) {
  using nlohmann::json;
  auto entries = [](const std::vector<VifEntry>& v) {
    json arr = json::array();
    for (const auto& e : v) {
      // JSON has no infinity; perfectly collinear features report null.
      arr.push_back({{"feature", e.feature},
                     {"vif", std::isfinite(e.vif) ? json(e.vif) : json(nullptr)}});
    }
    return arr;
  };
  return json{{"threshold", r.threshold}, {"removed", entries(r.removed)}, {"kept", entries(r.kept)}}
             .dump(2) +
         "\n";
}

void SyntheticSpec::validate() const {
  const std::size_t k = component_sizes.size();
  if (k == 0) throw ConfigError("synthetic spec needs at least one component");
  if (x_means.size() != k || x_variances.size() != k || intercepts.size() != k || slopes.size() != k) {
    throw ConfigError("synthetic spec lists disagree in length");
  }
  const Eigen::Index p = x_means.front().size();
  if (p < 1) throw ConfigError("synthetic spec needs at least one feature");
  for (std::size_t c = 0; c < k; ++c) {
    if (component_sizes[c] == 0) throw ConfigError("synthetic component sizes must be positive");
    if (x_means[c].size() != p || x_variances[c].size() != p || slopes[c].size() != p) {
      throw ConfigError("synthetic spec feature dimensions disagree");
    }
    if (!(x_variances[c].array() > 0.0).all()) {
      throw ConfigError("synthetic x variances must be positive");
    }
  }
  if (!(residual_variance >= 0.0)) throw ConfigError("residual variance must be nonnegative");
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Eigen::Index p = spec.x_means.front().size();
  const auto n = static_cast<Eigen::Index>(
      std::accumulate(spec.component_sizes.begin(), spec.component_sizes.end(), std::size_t{0}));
  Rng rng(spec.seed);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  const double noise_sd = std::sqrt(spec.residual_variance);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < spec.component_sizes.size(); ++c) {
    const Eigen::VectorXd sd = spec.x_variances[c].array().sqrt();
    for (std::size_t i = 0; i < spec.component_sizes[c]; ++i, ++row) {
      for (Eigen::Index j = 0; j < p; ++j) {
        x(row, j) = rng.normal(spec.x_means[c](j), sd(j));
      }
      y(row) = spec.intercepts[c] + spec.slopes[c].dot(x.row(row).transpose()) +
               noise_sd * rng.normal();
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<Eigen::Index>(order));

  std::vector<std::string> names;
  if (p == 1) {
    names.emplace_back("x");
  } else {
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  }
  return Dataset(std::move(x), std::move(y), std::move(names), "y").subset(order);
}

}  // namespace dogr
