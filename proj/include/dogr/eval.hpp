#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dogr/dataset.hpp"
#include "dogr/inference.hpp"
#include "dogr/model.hpp"

namespace dogr {

double rmse(const Eigen::Ref<const Eigen::VectorXd>& y_true, const Eigen::Ref<const Eigen::VectorXd>& y_pred);
double mae(const Eigen::Ref<const Eigen::VectorXd>& y_true, const Eigen::Ref<const Eigen::VectorXd>& y_pred);

struct CvConfig {
  std::size_t outer_folds = 5;
  std::size_t inner_folds = 5;
  std::size_t repeats = 1;
  std::vector<std::size_t> k_grid{1, 2, 3, 4, 5, 6};
  std::uint64_t seed = 0;
  PredictionMode prediction_mode = PredictionMode::posterior_weights;
  unsigned threads = 1;  // 0 = available parallelism

  void validate() const;
};

/// Seeded shuffle of 0..n-1 cut into `folds` contiguous chunks whose sizes
/// differ by at most one (the first n % folds chunks get the extra row).
std::vector<std::vector<Eigen::Index>> partition_folds(Eigen::Index n, std::size_t folds,
                                                       std::uint64_t seed);

/// splitmix64 mix of a base seed with two stream identifiers.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::size_t chosen_k = 0;  // 0 when the fold failed
  double rmse = 0.0;
  double mae = 0.0;
  double baseline_rmse = 0.0;
  double baseline_mae = 0.0;
  bool failed = false;
  std::string diagnostic;
  std::vector<double> inner_rmse;  // per k_grid entry; NaN when disqualified
  std::vector<Eigen::Index> train_indices;
  std::vector<Eigen::Index> test_indices;
  Eigen::VectorXd predictions;
  Eigen::VectorXd baseline_predictions;
};

struct MetricSummary {
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double mean_mae = 0.0;
  double std_mae = 0.0;
};

struct EvalReport {
  std::vector<FoldResult> per_fold;  // ordered by (repeat, fold)
  MetricSummary dogr;
  MetricSummary baseline;  // pooled MLR on identical splits
};

/// Nested cross-validation. For every outer fold, K is chosen by the lowest
/// mean inner-fold RMSE (ties to the smaller K), the model is refit on the
/// whole outer training split and scored on the held-out fold. Standard
/// deviations are sample (n-1) deviations over successful folds.
EvalReport nested_cv(const Dataset& d, const CvConfig& cfg, const FitConfig& fit_cfg);

std::string eval_report_json(const EvalReport& r);
std::string eval_report_table(const EvalReport& r);

/// Columns: row, y_true, y_pred_dogr, y_pred_mlr, fold (fold id = repeat *
/// outer_folds + fold).
std::string predictions_csv(const EvalReport& r, const Dataset& d, std::size_t outer_folds,
                            int precision = 17);

}  // namespace dogr
