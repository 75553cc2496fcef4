#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dogr/dataset.hpp"
#include "dogr/numerics.hpp"
#include "dogr/random.hpp"

namespace dogr {

enum class InitStrategy { random_responsibilities, kmeans_on_xy };

struct FitConfig {
  std::size_t n_components = 1;
  int max_iterations = 500;
  double rel_tolerance = 1e-6;
  std::uint64_t seed = 0;
  InitStrategy init_strategy = InitStrategy::random_responsibilities;
  /// Relative: the ridge added to each covariance is covariance_ridge * trace(S)/p.
  double covariance_ridge = 1e-6;
  double residual_variance_floor = 1e-8;
  double min_component_weight = 1e-6;
  int n_restarts = 1;

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

/// One latent subgroup: a Gaussian over the features plus a linear
/// regression of the outcome with homoscedastic residuals.
struct Component {
  double weight = 1.0;
  Eigen::VectorXd mean;
  SymmetricMatrix<double> covariance;
  Eigen::VectorXd coefficients;  // intercept first, length p+1
  double residual_variance = 1.0;
  Eigen::VectorXd coefficient_standard_errors;

  Eigen::Index dim() const { return mean.size(); }
};

struct ReseedEvent {
  int iteration = 0;
  std::size_t component = 0;
};

struct Model {
  std::vector<Component> components;
  std::vector<std::string> feature_names;
  std::string outcome_name;
  std::vector<double> fit_trace;  // log-likelihood per EM iteration
  bool converged = false;
  int iterations = 0;
  FitConfig config;
  std::vector<ReseedEvent> reseeds;

  std::size_t n_components() const { return components.size(); }
  Eigen::Index n_features() const {
    return components.empty() ? 0 : components.front().dim();
  }
  double final_log_likelihood() const {
    return fit_trace.empty() ? -std::numeric_limits<double>::infinity() : fit_trace.back();
  }
};

/// N x K responsibilities; rows sum to one.
struct MembershipMatrix {
  Eigen::MatrixXd values;
};

/// beta_0 + sum_j beta_j x_j.
double component_regression_value(const Component& c, const Eigen::Ref<const Eigen::VectorXd>& x);

/// log f_X(x) + log phi(y; yhat(x), residual_variance).
double joint_log_density(const Component& c, const Eigen::Ref<const Eigen::VectorXd>& x, double y);

/// N x K matrix of log(omega_k) + log f_k(x_i, y_i).
Eigen::MatrixXd weighted_log_densities(const std::vector<Component>& components,
                                       const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// N x K matrix of log(omega_k) + log f_X^(k)(x_i) (outcome unseen).
Eigen::MatrixXd weighted_marginal_log_densities(const std::vector<Component>& components,
                                                const Eigen::MatrixXd& x);

double log_likelihood(const Model& m, const Dataset& d);

MembershipMatrix e_step(const Model& m, const Dataset& d);

/// Parameter updates from fixed responsibilities. Throws
/// DegenerateComponentError when a column mass is below
/// min_component_weight * N; FactorizationError / SingularDesignError when
/// ridge escalation (x10, three times) cannot rescue a component.
std::vector<Component> m_step(const Dataset& d, const MembershipMatrix& gamma, const FitConfig& cfg);

/// Starting responsibilities for the configured strategy.
MembershipMatrix initial_responsibilities(const Dataset& d, const FitConfig& cfg, Rng& rng);

/// EM from the configured initialization; with n_restarts > 1, seeds
/// seed, seed+1, ... are tried and the highest final log-likelihood wins.
Model fit(const Dataset& d, const FitConfig& cfg);

}  // namespace dogr
