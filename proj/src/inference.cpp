#include "dogr/inference.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dogr/error.hpp"
#include "dogr/format.hpp"

namespace dogr {

namespace {

void check_dim(const Model& m, Eigen::Index p) {
  if (m.components.empty()) {
    throw DimensionError("model has no components");
  }
  if (p != m.n_features()) {
    throw DimensionError("expected " + std::to_string(m.n_features()) + " features, got " +
                         std::to_string(p));
  }
}

Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& logs) {
  Eigen::MatrixXd out(logs.rows(), logs.cols());
  for (Eigen::Index i = 0; i < logs.rows(); ++i) {
    const double lse = log_sum_exp(logs.row(i));
    out.row(i) = (logs.row(i).array() - lse).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

Eigen::VectorXd predict_rows(const Model& m, const Eigen::MatrixXd& x, PredictionMode mode) {
  check_dim(m, x.cols());
  const auto k = static_cast<Eigen::Index>(m.n_components());
  Eigen::MatrixXd yhat(x.rows(), k);
  Eigen::VectorXd omega(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Component& comp = m.components[static_cast<std::size_t>(c)];
    yhat.col(c) = (x * comp.coefficients.tail(comp.dim())).array() + comp.coefficients(0);
    omega(c) = comp.weight;
  }
  if (mode == PredictionMode::global_weights) {
    return yhat * omega;
  }
  const Eigen::MatrixXd w = normalized_rows(weighted_marginal_log_densities(m.components, x));
  return (w.array() * yhat.array()).rowwise().sum();
}

double predict(const Model& m, const Eigen::Ref<const Eigen::VectorXd>& x, PredictionMode mode) {
  check_dim(m, x.size());
  return predict_rows(m, x.transpose(), mode)(0);
}

Eigen::VectorXd membership(const Model& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                           std::optional<double> y) {
  check_dim(m, x.size());
  const Eigen::MatrixXd row = x.transpose();
  const Eigen::MatrixXd logs =
      y ? weighted_log_densities(m.components, row, Eigen::VectorXd::Constant(1, *y))
        : weighted_marginal_log_densities(m.components, row);
  return normalized_rows(logs).row(0).transpose();
}

WlsSolution<double> pooled_regression(const Dataset& d) {
  return wls_fit(d.features(), d.outcome(), Eigen::VectorXd::Ones(d.rows()));
}

ZTest coefficient_z_test(double beta0, double se0, double beta1, double se1) {
  ZTest out;
  const double diff = beta0 - beta1;
  const double scale = std::sqrt(se0 * se0 + se1 * se1);
  if (!(scale > 0.0)) {
    out.undefined = diff != 0.0;
    return out;
  }
  out.z = diff / scale;
  out.p_value = std::min(1.0, std::erfc(std::abs(out.z) / std::sqrt(2.0)));
  return out;
}

std::vector<CoefficientReport> coefficient_report(const Model& m, const WlsSolution<double>& pooled) {
  const Eigen::Index p = m.n_features();
  if (pooled.coefficients.size() != p + 1 || pooled.standard_errors.size() != p + 1) {
    throw DimensionError("pooled fit does not match the model's feature count");
  }
  auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  std::vector<CoefficientReport> out;
  for (Eigen::Index j = 0; j < p; ++j) {
    CoefficientReport row;
    row.feature = m.feature_names.at(static_cast<std::size_t>(j));
    row.pooled_beta = pooled.coefficients(j + 1);
    row.pooled_se = pooled.standard_errors(j + 1);
    for (std::size_t k = 0; k < m.n_components(); ++k) {
      const Component& c = m.components[k];
      ComponentCoefficient cc;
      cc.component = k;
      cc.beta = c.coefficients(j + 1);
      cc.se = c.coefficient_standard_errors(j + 1);
      const ZTest test = coefficient_z_test(cc.beta, cc.se, row.pooled_beta, row.pooled_se);
      cc.z_score = test.z;
      cc.p_value = test.p_value;
      cc.z_undefined = test.undefined;
      cc.reversal_flag =
          sign(cc.beta) != sign(row.pooled_beta) && cc.p_value <= kReversalSignificance;
      row.per_component.push_back(cc);
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::string coefficient_report_csv(const std::vector<CoefficientReport>& report, int precision) {
  std::ostringstream out;
  out << "feature,component,beta,se,z,p,reversal\n";
  for (const auto& row : report) {
    out << row.feature << ",all," << format_double(row.pooled_beta, precision) << ','
        << format_double(row.pooled_se, precision) << ",,,\n";
    for (const auto& c : row.per_component) {
      out << row.feature << ',' << c.component << ',' << format_double(c.beta, precision) << ','
          << format_double(c.se, precision) << ',' << format_double(c.z_score, precision) << ','
          << format_double(c.p_value, precision) << ',' << (c.reversal_flag ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

RadarExport radar_export(const Model& m) {
  check_dim(m, m.n_features());
  const Eigen::Index p = m.n_features();
  const auto k = static_cast<Eigen::Index>(m.n_components());
  Eigen::MatrixXd mu(k, p);
  for (Eigen::Index c = 0; c < k; ++c) {
    mu.row(c) = m.components[static_cast<std::size_t>(c)].mean.transpose();
  }

  RadarExport out;
  out.feature_names = m.feature_names;
  Eigen::VectorXd divisor(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    divisor(j) = mu.col(j).maxCoeff();
    if (!(divisor(j) > 0.0)) {
      out.warnings.push_back(m.feature_names.at(static_cast<std::size_t>(j)));
      divisor(j) = mu.col(j).cwiseAbs().maxCoeff();
    }
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const Component& comp = m.components[static_cast<std::size_t>(c)];
    RadarComponent rc;
    rc.index = static_cast<std::size_t>(c);
    rc.weight = comp.weight;
    rc.outcome_mean = component_regression_value(comp, comp.mean);
    rc.normalized_mu.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      rc.normalized_mu(j) = divisor(j) > 0.0 ? mu(c, j) / divisor(j) : 0.0;
    }
    out.components.push_back(std::move(rc));
  }
  return out;
}

RadarExport radar_export(const Model& m, const Dataset& d) {
  RadarExport out = radar_export(m);
  const MembershipMatrix gamma = e_step(m, d);
  const Eigen::VectorXd& y = d.outcome();
  for (auto& rc : out.components) {
    const Eigen::VectorXd w = gamma.values.col(static_cast<Eigen::Index>(rc.index));
    const double mass = w.sum();
    if (!(mass > 0.0)) continue;
    const double mean = w.dot(y) / mass;
    const double n_eff = mass * mass / w.squaredNorm();
    rc.outcome_mean = mean;
    // reliability-weighted unbiased variance; undefined below two effective points
    const double denom = mass - w.squaredNorm() / mass;
    if (!(denom > 0.0)) continue;
    const double var = (w.array() * (y.array() - mean).square()).sum() / denom;
    rc.outcome_std_error = std::sqrt(var / n_eff);
  }
  return out;
}

std::string radar_json(const RadarExport& r) {
  using nlohmann::json;
  json components = json::array();
  for (const auto& c : r.components) {
    json mu = json::object();
    for (std::size_t j = 0; j < r.feature_names.size(); ++j) {
      mu[r.feature_names[j]] = c.normalized_mu(static_cast<Eigen::Index>(j));
    }
    json row = {{"index", c.index},
                {"weight", c.weight},
                {"outcome_mean", c.outcome_mean},
                {"normalized_mu", mu}};
    if (c.outcome_std_error) {
      row["outcome_std_error"] = *c.outcome_std_error;
    }
    components.push_back(std::move(row));
  }
  json doc = {{"feature_order", r.feature_names},
              {"components", components},
              {"warnings", r.warnings}};
  return doc.dump(2) + "\n";
}

}  // namespace dogr
