#include "dogr/selection.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dogr/error.hpp"
#include "dogr/format.hpp"
#include "dogr/parallel.hpp"

namespace dogr {

long long parameter_count(long long k, long long p) { return k * (p * p + 2 * p + 3); }

double bic(double log_likelihood, long long k, long long p, long long n) {
  if (n < 1) {
    throw ConfigError("bic: n must be at least 1");
  }
  return -2.0 * log_likelihood +
         static_cast<double>(parameter_count(k, p)) * std::log(static_cast<double>(n));
}

BicSweepResult sweep(const Dataset& d, const std::vector<std::size_t>& k_range, const FitConfig& cfg,
                     unsigned threads) {
  if (k_range.empty()) {
    throw ConfigError("sweep: empty K range");
  }
  BicSweepResult out;
  out.rows.resize(k_range.size());
  parallel_for(k_range.size(), threads, [&](std::size_t i) {
    BicRow& row = out.rows[i];
    row.k = k_range[i];
    row.parameter_count = parameter_count(static_cast<long long>(row.k), d.cols());
    FitConfig local = cfg;
    local.n_components = row.k;
    local.seed = cfg.seed + row.k;
    try {
      const Model m = fit(d, local);
      row.log_likelihood = m.final_log_likelihood();
      row.bic = bic(row.log_likelihood, static_cast<long long>(row.k), d.cols(), d.rows());
    } catch (const Error& e) {
      row.failure = e.what();
      row.log_likelihood = std::nan("");
      row.bic = std::nan("");
    }
  });

  const BicRow* best = nullptr;
  for (const auto& row : out.rows) {
    if (row.failure) continue;
    if (!best || row.bic < best->bic || (row.bic == best->bic && row.k < best->k)) {
      best = &row;
    }
  }
  if (!best) {
    throw FitError(0, "every K in the sweep failed to fit");
  }
  out.best_k = best->k;
  return out;
}

std::string sweep_csv(const BicSweepResult& r, int precision) {
  std::ostringstream out;
  out << "K,loglik,params,bic,selected,failure\n";
  for (const auto& row : r.rows) {
    out << row.k << ',' << format_double(row.log_likelihood, precision) << ','
        << row.parameter_count << ',' << format_double(row.bic, precision) << ','
        << (row.k == r.best_k ? 1 : 0) << ',';
    if (row.failure) {
      std::string msg = *row.failure;
      for (auto& ch : msg) {
        if (ch == '"') ch = '\'';
      }
      out << '"' << msg << '"';
    }
    out << '\n';
  }
  return out.str();
}

std::string sweep_json(const BicSweepResult& r) {
  using nlohmann::json;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json j = {{"K", row.k}, {"params", row.parameter_count}, {"selected", row.k == r.best_k}};
    if (row.failure) {
      j["failure"] = *row.failure;
      j["loglik"] = nullptr;
      j["bic"] = nullptr;
    } else {
      j["loglik"] = row.log_likelihood;
      j["bic"] = row.bic;
    }
    rows.push_back(std::move(j));
  }
  return json{{"rows", rows}, {"best_k", r.best_k}}.dump(2) + "\n";
}

}  // namespace dogr
