#include "dogr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "dogr/error.hpp"
#include "dogr/format.hpp"
#include "dogr/parallel.hpp"
#include "dogr/random.hpp"

namespace dogr {

namespace {

void check_pair(Eigen::Index a, Eigen::Index b) {
  if (a != b) throw DimensionError("metric inputs differ in length");
  if (a == 0) throw DimensionError("metric inputs are empty");
}

std::vector<Eigen::Index> complement(Eigen::Index n, const std::vector<Eigen::Index>& held_out) {
  std::vector<bool> out_mask(static_cast<std::size_t>(n), false);
  for (auto i : held_out) out_mask[static_cast<std::size_t>(i)] = true;
  std::vector<Eigen::Index> rest;
  rest.reserve(static_cast<std::size_t>(n) - held_out.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!out_mask[static_cast<std::size_t>(i)]) rest.push_back(i);
  }
  return rest;
}

std::pair<double, double> mean_and_sd(const std::vector<double>& v) {
  if (v.empty()) return {std::nan(""), std::nan("")};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

double inner_cv_rmse(const Dataset& train, std::size_t k, std::size_t inner_folds,
                     std::uint64_t seed, const FitConfig& fit_cfg, PredictionMode mode) {
  const auto folds = partition_folds(train.rows(), inner_folds, seed);
  double total = 0.0;
  for (const auto& held : folds) {
    const auto rest = complement(train.rows(), held);
    FitConfig cfg = fit_cfg;
    cfg.n_components = k;
    const Model m = fit(train.subset(rest), cfg);
    const Dataset test = train.subset(held);
    total += rmse(test.outcome(), predict_rows(m, test.features(), mode));
  }
  return total / static_cast<double>(folds.size());
}

FoldResult run_outer_fold(const Dataset& d, const CvConfig& cfg, const FitConfig& fit_cfg,
                          std::size_t repeat, std::size_t fold,
                          const std::vector<Eigen::Index>& test_idx) {
  FoldResult r;
  r.repeat = repeat;
  r.fold = fold;
  r.test_indices = test_idx;
  r.train_indices = complement(d.rows(), test_idx);
  const Dataset train = d.subset(r.train_indices);
  const Dataset test = d.subset(r.test_indices);

  const auto baseline = pooled_regression(train);
  r.baseline_predictions =
      (test.features() * baseline.coefficients.tail(d.cols())).array() + baseline.coefficients(0);
  r.baseline_rmse = rmse(test.outcome(), r.baseline_predictions);
  r.baseline_mae = mae(test.outcome(), r.baseline_predictions);

  const std::uint64_t inner_seed = derive_seed(cfg.seed, repeat + 1, fold + 1);
  r.inner_rmse.assign(cfg.k_grid.size(), std::nan(""));
  std::optional<std::size_t> best;
  std::string failures;
  for (std::size_t g = 0; g < cfg.k_grid.size(); ++g) {
    try {
      r.inner_rmse[g] = inner_cv_rmse(train, cfg.k_grid[g], cfg.inner_folds, inner_seed, fit_cfg,
                                      cfg.prediction_mode);
    } catch (const Error& e) {
      failures += "K=" + std::to_string(cfg.k_grid[g]) + ": " + e.what() + "; ";
      continue;
    }
    if (!best || r.inner_rmse[g] < r.inner_rmse[*best] ||
        (r.inner_rmse[g] == r.inner_rmse[*best] && cfg.k_grid[g] < cfg.k_grid[*best])) {
      best = g;
    }
  }
  if (!best) {
    r.failed = true;
    r.diagnostic = "every K failed in inner CV: " + failures;
    return r;
  }
  r.chosen_k = cfg.k_grid[*best];
  r.diagnostic = failures;
  try {
    FitConfig final_cfg = fit_cfg;
    final_cfg.n_components = r.chosen_k;
    const Model m = fit(train, final_cfg);
    r.predictions = predict_rows(m, test.features(), cfg.prediction_mode);
    r.rmse = rmse(test.outcome(), r.predictions);
    r.mae = mae(test.outcome(), r.predictions);
  } catch (const Error& e) {
    r.failed = true;
    r.diagnostic += std::string("refit failed: ") + e.what();
  }
  return r;
}

}  // namespace

double rmse(const Eigen::Ref<const Eigen::VectorXd>& y_true, const Eigen::Ref<const Eigen::VectorXd>& y_pred) {
  check_pair(y_true.size(), y_pred.size());
  return std::sqrt((y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size()));
}

double mae(const Eigen::Ref<const Eigen::VectorXd>& y_true, const Eigen::Ref<const Eigen::VectorXd>& y_pred) {
  check_pair(y_true.size(), y_pred.size());
  return (y_true - y_pred).cwiseAbs().sum() / static_cast<double>(y_true.size());
}

void CvConfig::validate() const {
  if (outer_folds < 2 || inner_folds < 2) throw ConfigError("fold counts must be at least 2");
  if (repeats < 1) throw ConfigError("repeats must be positive");
  if (k_grid.empty()) throw ConfigError("K grid is empty");
  for (auto k : k_grid) {
    if (k < 1) throw ConfigError("K grid entries must be positive");
  }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::vector<std::vector<Eigen::Index>> partition_folds(Eigen::Index n, std::size_t folds,
                                                       std::uint64_t seed) {
  if (folds < 1 || static_cast<Eigen::Index>(folds) > n) {
    throw ConfigError("cannot split " + std::to_string(n) + " rows into " + std::to_string(folds) +
                      " folds");
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<Eigen::Index>(order));
  std::vector<std::vector<Eigen::Index>> out(folds);
  const std::size_t base = static_cast<std::size_t>(n) / folds;
  const std::size_t extra = static_cast<std::size_t>(n) % folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    out[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                  order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(out[f].begin(), out[f].end());
    pos += len;
  }
  return out;
}

EvalReport nested_cv(const Dataset& d, const CvConfig& cfg, const FitConfig& fit_cfg) {
  cfg.validate();
  fit_cfg.validate();
  std::vector<std::vector<std::vector<Eigen::Index>>> splits;
  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    splits.push_back(partition_folds(d.rows(), cfg.outer_folds, derive_seed(cfg.seed, rep, 0)));
  }

  EvalReport report;
  report.per_fold.resize(cfg.repeats * cfg.outer_folds);
  parallel_for(report.per_fold.size(), cfg.threads, [&](std::size_t job) {
    const std::size_t rep = job / cfg.outer_folds;
    const std::size_t fold = job % cfg.outer_folds;
    report.per_fold[job] = run_outer_fold(d, cfg, fit_cfg, rep, fold, splits[rep][fold]);
  });

  std::vector<double> r1, m1, r0, m0;
  for (const auto& f : report.per_fold) {
    r0.push_back(f.baseline_rmse);
    m0.push_back(f.baseline_mae);
    if (f.failed) continue;
    r1.push_back(f.rmse);
    m1.push_back(f.mae);
  }
  if (r1.empty()) {
    throw FitError(0, "nested CV: every outer fold failed");
  }
  std::tie(report.dogr.mean_rmse, report.dogr.std_rmse) = mean_and_sd(r1);
  std::tie(report.dogr.mean_mae, report.dogr.std_mae) = mean_and_sd(m1);
  std::tie(report.baseline.mean_rmse, report.baseline.std_rmse) = mean_and_sd(r0);
  std::tie(report.baseline.mean_mae, report.baseline.std_mae) = mean_and_sd(m0);
  return report;
}

std::string eval_report_json(const EvalReport& r) {
  using nlohmann::json;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json folds = json::array();
  for (const auto& f : r.per_fold) {
    json inner = json::array();
    for (double v : f.inner_rmse) inner.push_back(finite_or_null(v));
    json row = {{"repeat", f.repeat},
                {"fold", f.fold},
                {"failed", f.failed},
                {"baseline_rmse", f.baseline_rmse},
                {"baseline_mae", f.baseline_mae},
                {"inner_rmse", inner}};
    if (!f.failed) {
      row["chosen_k"] = f.chosen_k;
      row["rmse"] = f.rmse;
      row["mae"] = f.mae;
    }
    if (!f.diagnostic.empty()) row["diagnostic"] = f.diagnostic;
    folds.push_back(std::move(row));
  }
  auto summary = [&](const MetricSummary& s) {
    return json{{"mean_rmse", finite_or_null(s.mean_rmse)},
                {"std_rmse", finite_or_null(s.std_rmse)},
                {"mean_mae", finite_or_null(s.mean_mae)},
                {"std_mae", finite_or_null(s.std_mae)}};
  };
  return json{{"per_fold", folds}, {"dogr", summary(r.dogr)}, {"baseline", summary(r.baseline)}}
             .dump(2) +
         "\n";
}

std::string eval_report_table(const EvalReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "repeat  fold  K   rmse        mae         mlr_rmse    mlr_mae\n";
  for (const auto& f : r.per_fold) {
    out << std::setw(6) << f.repeat << "  " << std::setw(4) << f.fold << "  ";
    if (f.failed) {
      out << "failed: " << f.diagnostic << '\n';
      continue;
    }
    out << std::setw(2) << f.chosen_k << "  " << std::setw(10) << f.rmse << "  " << std::setw(10)
        << f.mae << "  " << std::setw(10) << f.baseline_rmse << "  " << std::setw(10)
        << f.baseline_mae << '\n';
  }
  out << "\nmethod  RMSE (± sd)            MAE (± sd)\n";
  out << "DoGR    " << r.dogr.mean_rmse << " (± " << r.dogr.std_rmse << ")    " << r.dogr.mean_mae
      << " (± " << r.dogr.std_mae << ")\n";
  out << "MLR     " << r.baseline.mean_rmse << " (± " << r.baseline.std_rmse << ")    "
      << r.baseline.mean_mae << " (± " << r.baseline.std_mae << ")\n";
  return out.str();
}

std::string predictions_csv(const EvalReport& r, const Dataset& d, std::size_t outer_folds,
                            int precision) {
  std::ostringstream out;
  out << "row,y_true,y_pred_dogr,y_pred_mlr,fold\n";
  for (const auto& f : r.per_fold) {
    for (std::size_t t = 0; t < f.test_indices.size(); ++t) {
      const Eigen::Index i = f.test_indices[t];
      const auto ti = static_cast<Eigen::Index>(t);
      out << i << ',' << format_double(d.outcome()(i), precision) << ','
          << (f.failed ? std::string() : format_double(f.predictions(ti), precision)) << ','
          << format_double(f.baseline_predictions(ti), precision) << ','
          << f.repeat * outer_folds + f.fold << '\n';
    }
  }
  return out.str();
}

}  // namespace dogr
