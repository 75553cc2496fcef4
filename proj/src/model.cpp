#include "dogr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "dogr/error.hpp"

namespace dogr {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

// Escalations applied when a covariance or weighted design fails to factorize.
constexpr int kRidgeEscalations = 3;

void check_features(const Model& m, const Dataset& d) {
  if (m.components.empty()) {
    throw DimensionError("model has no components");
  }
  if (d.cols() != m.n_features()) {
    throw DimensionError("dataset has " + std::to_string(d.cols()) + " features, model expects " +
                         std::to_string(m.n_features()));
  }
}

Eigen::VectorXd regression_values(const Component& c, const Eigen::MatrixXd& x) {
  return (x * c.coefficients.tail(c.dim())).array() + c.coefficients(0);
}

GaussianFactor<double> factor_of(const Component& c, std::size_t index) {
  try {
    return GaussianFactor<double>(c.covariance);
  } catch (const FactorizationError&) {
    throw FactorizationError("covariance is not positive definite", index);
  }
}

// Normal equations with a ridge on the slopes; the last resort when the
// weighted design is rank deficient.
WlsSolution<double> ridged_wls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w, double relative_ridge) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd design(n, p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = x;
  const Eigen::MatrixXd gram = design.transpose() * w.asDiagonal() * design;
  const Eigen::VectorXd rhs = design.transpose() * w.cwiseProduct(y);
  const double scale = std::max(gram.diagonal().tail(p).mean(), 1e-300);
  Eigen::MatrixXd penalized = gram;
  penalized.diagonal().tail(p).array() += relative_ridge * scale;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(penalized);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all()) {
    throw SingularDesignError("weighted design is singular even with ridge");
  }
  WlsSolution<double> out;
  out.coefficients = ldlt.solve(rhs);
  if (!out.coefficients.allFinite()) {
    throw SingularDesignError("weighted design is singular even with ridge");
  }
  const Eigen::VectorXd resid = y - design * out.coefficients;
  out.weighted_rss = (w.array() * resid.array().square()).sum();
  out.effective_weight = w.sum();
  const double dof = out.effective_weight - static_cast<double>(p + 1);
  const double variance = out.weighted_rss / (dof > 0.0 ? dof : out.effective_weight);
  const Eigen::MatrixXd inv = ldlt.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
  out.standard_errors = (variance * inv.diagonal().array()).max(0.0).sqrt();
  return out;
}

WlsSolution<double> component_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& w, const FitConfig& cfg) {
  try {
    return wls_fit(x, y, w);
  } catch (const SingularDesignError&) {
  }
  const double base = cfg.covariance_ridge > 0.0 ? cfg.covariance_ridge : 1e-12;
  double ridge = base;
  for (int step = 0; step < kRidgeEscalations; ++step) {
    ridge *= 10.0;
    try {
      return ridged_wls(x, y, w, ridge);
    } catch (const SingularDesignError&) {
    }
  }
  throw SingularDesignError("weighted design stays singular after ridge escalation");
}

SymmetricMatrix<double> regularized_covariance(const Eigen::MatrixXd& scatter,
                                               const FitConfig& cfg, std::size_t index) {
  const SymmetricMatrix<double> base(scatter);
  const double p = static_cast<double>(scatter.rows());
  const double level = std::max(scatter.trace() / p, 0.0);
  double ridge = cfg.covariance_ridge * (level > 0.0 ? level : 1.0);
  if (!(ridge > 0.0)) {
    ridge = 0.0;
  }
  for (int step = 0; step <= kRidgeEscalations; ++step) {
    SymmetricMatrix<double> candidate = base.with_ridge(ridge);
    Eigen::LLT<Eigen::MatrixXd> llt(candidate.matrix());
    if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all()) {
      return candidate;
    }
    ridge = ridge > 0.0 ? ridge * 10.0 : 1e-12 * std::max(level, 1.0);
  }
  throw FactorizationError("covariance stays singular after ridge escalation", index);
}

void normalize_rows_from_logs(const Eigen::MatrixXd& logs, Eigen::MatrixXd& gamma,
                              Eigen::VectorXd& row_lse) {
  const Eigen::Index n = logs.rows();
  gamma.resize(n, logs.cols());
  row_lse.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lse = log_sum_exp(logs.row(i));
    row_lse(i) = lse;
    gamma.row(i) = (logs.row(i).array() - lse).exp();
    // Renormalize to clean up rounding in exp.
    gamma.row(i) /= gamma.row(i).sum();
  }
}

MembershipMatrix kmeans_responsibilities(const Dataset& d, std::size_t k, Rng& rng) {
  const Eigen::Index n = d.rows();
  const Eigen::Index p = d.cols();
  Eigen::MatrixXd z(n, p + 1);
  z.leftCols(p) = d.features();
  z.col(p) = d.outcome();
  for (Eigen::Index j = 0; j <= p; ++j) {
    const double mean = z.col(j).mean();
    z.col(j).array() -= mean;
    const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) z.col(j) /= sd;
  }

  // k-means++ seeding.
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), p + 1);
  centers.row(0) = z.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd nearest = (z.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest(i);
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = z.row(pick);
    nearest = nearest.cwiseMin((z.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Eigen::Index> label(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < 50; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      (centers.rowwise() - z.row(i)).rowwise().squaredNorm().minCoeff(&best);
      label[static_cast<std::size_t>(i)] = best;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), p + 1);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(label[static_cast<std::size_t>(i)]) += z.row(i);
      counts(label[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(k); ++c) {
      if (counts(c) > 0.0) centers.row(c) = sums.row(c) / counts(c);
    }
  }

  MembershipMatrix gamma;
  if (k == 1) {
    gamma.values = Eigen::MatrixXd::Ones(n, 1);
    return gamma;
  }
  const double off = 0.1 / static_cast<double>(k - 1);
  gamma.values = Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(k), off);
  for (Eigen::Index i = 0; i < n; ++i) {
    gamma.values(i, label[static_cast<std::size_t>(i)]) = 0.9;
  }
  return gamma;
}

// Spread the rows least claimed by any component evenly over all components.
void reseed_rows(Eigen::MatrixXd& gamma, Eigen::Index p) {
  const Eigen::Index n = gamma.rows();
  const Eigen::Index k = gamma.cols();
  const Eigen::Index count = std::min<Eigen::Index>(
      n, std::max<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(0.05 * static_cast<double>(n))),
                                p + 2));
  const Eigen::VectorXd top = gamma.rowwise().maxCoeff();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return top(a) < top(b); });
  for (Eigen::Index r = 0; r < count; ++r) {
    gamma.row(order[static_cast<std::size_t>(r)]).setConstant(1.0 / static_cast<double>(k));
  }
}

struct SingleFit {
  std::vector<Component> components;
  std::vector<double> trace;
  bool converged = false;
  std::vector<ReseedEvent> reseeds;
};

SingleFit fit_once(const Dataset& d, const FitConfig& cfg, std::uint64_t seed) {
  const std::size_t k = cfg.n_components;
  Rng rng(seed);
  MembershipMatrix gamma = initial_responsibilities(d, cfg, rng);
  std::vector<bool> reseeded(k, false);
  SingleFit out;

  auto maximize = [&](int iteration) {
    while (true) {
      try {
        return m_step(d, gamma, cfg);
      } catch (const DegenerateComponentError& e) {
        if (reseeded[e.component()]) {
          throw FitError(iteration, std::string(e.what()) + " after an earlier re-seed");
        }
        reseeded[e.component()] = true;
        out.reseeds.push_back({iteration, e.component()});
        reseed_rows(gamma.values, d.cols());
      } catch (const FactorizationError& e) {
        throw FitError(iteration, e.what());
      } catch (const SingularDesignError& e) {
        throw FitError(iteration, e.what());
      }
    }
  };

  out.components = maximize(0);
  Eigen::VectorXd row_lse;
  for (int iteration = 1; iteration <= cfg.max_iterations; ++iteration) {
    Eigen::MatrixXd logs;
    try {
      logs = weighted_log_densities(out.components, d.features(), d.outcome());
    } catch (const FactorizationError& e) {
      throw FitError(iteration, e.what());
    }
    normalize_rows_from_logs(logs, gamma.values, row_lse);
    const double ll = row_lse.sum();
    if (!std::isfinite(ll)) {
      throw FitError(iteration, "log-likelihood is not finite");
    }
    out.trace.push_back(ll);
    if (out.trace.size() > 1) {
      const double previous = out.trace[out.trace.size() - 2];
      if (ll - previous < cfg.rel_tolerance * std::abs(previous)) {
        out.converged = true;
        break;
      }
    }
    if (iteration == cfg.max_iterations) break;
    out.components = maximize(iteration);
  }
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (n_components < 1) throw ConfigError("n_components must be at least 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be positive");
  if (!(rel_tolerance > 0.0)) throw ConfigError("rel_tolerance must be positive");
  if (!(covariance_ridge >= 0.0) || !std::isfinite(covariance_ridge)) {
    throw ConfigError("covariance_ridge must be nonnegative");
  }
  if (!(residual_variance_floor > 0.0)) throw ConfigError("residual_variance_floor must be positive");
  if (!(min_component_weight >= 0.0) || min_component_weight >= 1.0) {
    throw ConfigError("min_component_weight must lie in [0, 1)");
  }
  if (n_restarts < 1) throw ConfigError("n_restarts must be positive");
}

double component_regression_value(const Component& c, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != c.dim() || c.coefficients.size() != c.dim() + 1) {
    throw DimensionError("regression value: expected " + std::to_string(c.dim()) +
                         " features, got " + std::to_string(x.size()));
  }
  return c.coefficients(0) + c.coefficients.tail(c.dim()).dot(x);
}

double joint_log_density(const Component& c, const Eigen::Ref<const Eigen::VectorXd>& x, double y) {
  const double yhat = component_regression_value(c, x);
  const double r = y - yhat;
  return mvn_log_density(x, c.mean, c.covariance) -
         0.5 * (kLog2Pi + std::log(c.residual_variance) + r * r / c.residual_variance);
}

Eigen::MatrixXd weighted_log_densities(const std::vector<Component>& components,
                                       const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(components.size()));
  for (std::size_t k = 0; k < components.size(); ++k) {
    const Component& c = components[k];
    const auto factor = factor_of(c, k);
    const Eigen::ArrayXd resid = y - regression_values(c, x);
    const double log_var = std::log(c.residual_variance);
    out.col(static_cast<Eigen::Index>(k)) =
        (factor.log_density_rows(x, c.mean).array() -
         0.5 * (kLog2Pi + log_var + resid.square() / c.residual_variance) + std::log(c.weight))
            .matrix();
  }
  return out;
}

Eigen::MatrixXd weighted_marginal_log_densities(const std::vector<Component>& components,
                                                const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(components.size()));
  for (std::size_t k = 0; k < components.size(); ++k) {
    const Component& c = components[k];
    out.col(static_cast<Eigen::Index>(k)) =
        (factor_of(c, k).log_density_rows(x, c.mean).array() + std::log(c.weight)).matrix();
  }
  return out;
}

double log_likelihood(const Model& m, const Dataset& d) {
  check_features(m, d);
  const Eigen::MatrixXd logs = weighted_log_densities(m.components, d.features(), d.outcome());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logs.rows(); ++i) {
    total += log_sum_exp(logs.row(i));
  }
  return total;
}

MembershipMatrix e_step(const Model& m, const Dataset& d) {
  check_features(m, d);
  MembershipMatrix gamma;
  Eigen::VectorXd row_lse;
  normalize_rows_from_logs(weighted_log_densities(m.components, d.features(), d.outcome()),
                           gamma.values, row_lse);
  return gamma;
}

std::vector<Component> m_step(const Dataset& d, const MembershipMatrix& gamma,
                              const FitConfig& cfg) {
  const Eigen::Index n = d.rows();
  const Eigen::Index k = gamma.values.cols();
  if (gamma.values.rows() != n || k < 1) {
    throw DimensionError("responsibilities do not match the dataset");
  }
  const Eigen::MatrixXd& x = d.features();
  const Eigen::VectorXd& y = d.outcome();
  const double floor_mass = cfg.min_component_weight * static_cast<double>(n);

  std::vector<Component> out(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    const Eigen::VectorXd w = gamma.values.col(c);
    const double mass = w.sum();
    if (!(mass > floor_mass) || !(mass > 0.0)) {
      throw DegenerateComponentError(idx, mass);
    }
    Component& comp = out[idx];
    comp.weight = mass / static_cast<double>(n);
    comp.mean = (x.transpose() * w) / mass;
    const Eigen::MatrixXd centered = x.rowwise() - comp.mean.transpose();
    const Eigen::MatrixXd scatter = (centered.transpose() * w.asDiagonal() * centered) / mass;
    comp.covariance = regularized_covariance(scatter, cfg, idx);

    const WlsSolution<double> wls = component_regression(x, y, w, cfg);
    comp.coefficients = wls.coefficients;
    comp.coefficient_standard_errors = wls.standard_errors;
    comp.residual_variance = std::max(wls.weighted_rss / mass, cfg.residual_variance_floor);
  }
  return out;
}

MembershipMatrix initial_responsibilities(const Dataset& d, const FitConfig& cfg, Rng& rng) {
  const std::size_t k = cfg.n_components;
  if (cfg.init_strategy == InitStrategy::kmeans_on_xy) {
    return kmeans_responsibilities(d, k, rng);
  }
  MembershipMatrix gamma;
  gamma.values.resize(d.rows(), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto row = rng.dirichlet_uniform(k);
    for (std::size_t c = 0; c < k; ++c) {
      gamma.values(i, static_cast<Eigen::Index>(c)) = row[c];
    }
  }
  return gamma;
}

Model fit(const Dataset& d, const FitConfig& cfg) {
  cfg.validate();
  const auto k = static_cast<Eigen::Index>(cfg.n_components);
  if (d.rows() <= k * (d.cols() + 2)) {
    throw InsufficientDataError("need more than K(p+2) = " + std::to_string(k * (d.cols() + 2)) +
                                " rows to fit " + std::to_string(k) + " components, got " +
                                std::to_string(d.rows()));
  }

  std::optional<SingleFit> best;
  std::optional<FitError> last_error;
  for (int r = 0; r < cfg.n_restarts; ++r) {
    try {
      SingleFit run = fit_once(d, cfg, cfg.seed + static_cast<std::uint64_t>(r));
      if (!best || run.trace.back() > best->trace.back()) {
        best = std::move(run);
      }
    } catch (const FitError& e) {
      last_error = e;
    }
  }
  if (!best) {
    throw *last_error;
  }

  Model m;
  m.components = std::move(best->components);
  m.feature_names = d.feature_names();
  m.outcome_name = d.outcome_name();
  m.fit_trace = std::move(best->trace);
  m.converged = best->converged;
  m.iterations = static_cast<int>(m.fit_trace.size());
  m.config = cfg;
  m.reseeds = std::move(best->reseeds);
  return m;
}

}  // namespace dogr
