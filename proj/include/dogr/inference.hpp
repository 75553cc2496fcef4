#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dogr/dataset.hpp"
#include "dogr/model.hpp"

namespace dogr {

/// How per-component regression values are averaged at prediction time.
///   global_weights:    sum_k omega_k yhat_k(x)
///   posterior_weights: sum_k w_k(x) yhat_k(x), w_k(x) ∝ omega_k f_X^(k)(x)
enum class PredictionMode { global_weights, posterior_weights };

double predict(const Model& m, const Eigen::Ref<const Eigen::VectorXd>& x,
               PredictionMode mode = PredictionMode::posterior_weights);

/// Predictions for every row of x (N x p).
Eigen::VectorXd predict_rows(const Model& m, const Eigen::MatrixXd& x,
                             PredictionMode mode = PredictionMode::posterior_weights);

/// Normalized responsibilities of a single point. With y the joint density is
/// used, without it only the feature marginal.
Eigen::VectorXd membership(const Model& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                           std::optional<double> y = std::nullopt);

/// Plain multiple linear regression on the whole dataset (unit weights).
WlsSolution<double> pooled_regression(const Dataset& d);

struct ZTest {
  double z = 0.0;
  double p_value = 1.0;
  bool undefined = false;  // both standard errors zero with differing betas
};

/// z = (b0 - b1) / sqrt(se0^2 + se1^2) with a two-sided normal p-value.
ZTest coefficient_z_test(double beta0, double se0, double beta1, double se1);

struct ComponentCoefficient {
  std::size_t component = 0;
  double beta = 0.0;
  double se = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  bool reversal_flag = false;
  bool z_undefined = false;
};

struct CoefficientReport {
  std::string feature;
  double pooled_beta = 0.0;
  double pooled_se = 0.0;
  std::vector<ComponentCoefficient> per_component;
};

inline constexpr double kReversalSignificance = 0.05;

/// Per-feature comparison of every component's slope against the pooled fit.
std::vector<CoefficientReport> coefficient_report(const Model& m, const WlsSolution<double>& pooled);

/// CSV with columns feature, component, beta, se, z, p, reversal. Pooled rows
/// use component "all" and leave z, p and reversal empty.
std::string coefficient_report_csv(const std::vector<CoefficientReport>& report, int precision = 17);

struct RadarComponent {
  std::size_t index = 0;
  double weight = 0.0;
  double outcome_mean = 0.0;
  std::optional<double> outcome_std_error;  // weighted standard error; needs data
  Eigen::VectorXd normalized_mu;
};

struct RadarExport {
  std::vector<std::string> feature_names;
  std::vector<RadarComponent> components;
  /// Features whose largest mean coordinate is not positive; normalized by
  /// the largest absolute coordinate instead.
  std::vector<std::string> warnings;
};

/// Component means divided coordinate-wise by their maximum over components.
/// Without data the outcome mean is the component's regression value at its
/// mean; with data it is the responsibility-weighted outcome mean.
RadarExport radar_export(const Model& m);
RadarExport radar_export(const Model& m, const Dataset& d);

/// {components: [{index, weight, outcome_mean, normalized_mu: {feature: value}}], warnings}
std::string radar_json(const RadarExport& r);

}  // namespace dogr
