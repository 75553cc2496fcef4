#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dogr/dataset.hpp"
#include "dogr/model.hpp"

namespace dogr {

/// Free parameters counted per component: k (p^2 + 2p + 3).
long long parameter_count(long long k, long long p);

/// -2 log L + k (p^2 + 2p + 3) ln n.
double bic(double log_likelihood, long long k, long long p, long long n);

struct BicRow {
  std::size_t k = 0;
  double log_likelihood = 0.0;
  long long parameter_count = 0;
  double bic = 0.0;
  std::optional<std::string> failure;  // set when the fit for this K failed
};

struct BicSweepResult {
  std::vector<BicRow> rows;  // ordered by K as given
  std::size_t best_k = 0;
};

/// Fits every K in k_range (seed cfg.seed + K) and picks the smallest BIC,
/// ties to the smaller K. Failed fits are recorded and skipped.
BicSweepResult sweep(const Dataset& d, const std::vector<std::size_t>& k_range, const FitConfig& cfg,
                     unsigned threads = 1);

/// Columns K, loglik, params, bic, selected, failure.
std::string sweep_csv(const BicSweepResult& r, int precision = 17);
std::string sweep_json(const BicSweepResult& r);

}  // namespace dogr
