#include "dogr/model_json.hpp"

#include <json.hpp>

#include "dogr/error.hpp"
#include "dogr/format.hpp"

namespace dogr {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index expected, const char* what) {
  const auto values = j.get<std::vector<double>>();
  if (expected >= 0 && static_cast<Eigen::Index>(values.size()) != expected) {
    throw DimensionError(std::string("model JSON: '") + what + "' has length " +
                         std::to_string(values.size()) + ", expected " + std::to_string(expected));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

const char* init_name(InitStrategy s) {
  return s == InitStrategy::kmeans_on_xy ? "kmeans_on_xy" : "random_responsibilities";
}

InitStrategy init_from(const std::string& name) {
  if (name == "kmeans_on_xy") return InitStrategy::kmeans_on_xy;
  if (name == "random_responsibilities") return InitStrategy::random_responsibilities;
  throw Error("model JSON: unknown init_strategy '" + name + "'");
}

json config_json(const FitConfig& c) {
  return {{"n_components", c.n_components},
          {"max_iterations", c.max_iterations},
          {"rel_tolerance", c.rel_tolerance},
          {"seed", c.seed},
          {"init_strategy", init_name(c.init_strategy)},
          {"covariance_ridge", c.covariance_ridge},
          {"residual_variance_floor", c.residual_variance_floor},
          {"min_component_weight", c.min_component_weight},
          {"n_restarts", c.n_restarts}};
}

FitConfig config_from(const json& j) {
  FitConfig c;
  c.n_components = j.at("n_components").get<std::size_t>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.rel_tolerance = j.at("rel_tolerance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.init_strategy = init_from(j.at("init_strategy").get<std::string>());
  c.covariance_ridge = j.at("covariance_ridge").get<double>();
  c.residual_variance_floor = j.at("residual_variance_floor").get<double>();
  c.min_component_weight = j.at("min_component_weight").get<double>();
  c.n_restarts = j.at("n_restarts").get<int>();
  return c;
}

}  // namespace

std::string serialize_model(const Model& m) {
  json components = json::array();
  for (const auto& c : m.components) {
    const Eigen::Index p = c.dim();
    std::vector<double> cov(static_cast<std::size_t>(p * p));
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) {
        cov[static_cast<std::size_t>(i * p + j)] = c.covariance(i, j);
      }
    }
    components.push_back({{"weight", c.weight},
                          {"mean", vector_json(c.mean)},
                          {"covariance", cov},
                          {"coefficients", vector_json(c.coefficients)},
                          {"residual_variance", c.residual_variance},
                          {"standard_errors", vector_json(c.coefficient_standard_errors)}});
  }
  json reseeds = json::array();
  for (const auto& e : m.reseeds) {
    reseeds.push_back({{"iteration", e.iteration}, {"component", e.component}});
  }
  json doc = {{"version", kModelFormatVersion},
              {"feature_names", m.feature_names},
              {"outcome_name", m.outcome_name},
              {"components", components},
              {"fit",
               {{"log_likelihood_trace", m.fit_trace},
                {"converged", m.converged},
                {"iterations", m.iterations},
                {"config", config_json(m.config)},
                {"reseeds", reseeds}}}};
  return doc.dump(2) + "\n";
}

Model parse_model(std::string_view text) {
  try {
    const json doc = json::parse(text);
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error("model JSON: unsupported version " + std::to_string(version));
    }
    Model m;
    m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    m.outcome_name = doc.at("outcome_name").get<std::string>();
    const auto p = static_cast<Eigen::Index>(m.feature_names.size());
    for (const auto& jc : doc.at("components")) {
      Component c;
      c.weight = jc.at("weight").get<double>();
      c.mean = vector_from(jc.at("mean"), p, "mean");
      const Eigen::VectorXd flat = vector_from(jc.at("covariance"), p * p, "covariance");
      c.covariance = SymmetricMatrix<double>(
          Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
              flat.data(), p, p));
      c.coefficients = vector_from(jc.at("coefficients"), p + 1, "coefficients");
      c.residual_variance = jc.at("residual_variance").get<double>();
      c.coefficient_standard_errors = vector_from(jc.at("standard_errors"), p + 1, "standard_errors");
      m.components.push_back(std::move(c));
    }
    if (m.components.empty()) {
      throw Error("model JSON: no components");
    }
    const json& fit = doc.at("fit");
    m.fit_trace = fit.at("log_likelihood_trace").get<std::vector<double>>();
    m.converged = fit.at("converged").get<bool>();
    m.iterations = fit.at("iterations").get<int>();
    m.config = config_from(fit.at("config"));
    if (fit.contains("reseeds")) {
      for (const auto& e : fit.at("reseeds")) {
        m.reseeds.push_back({e.at("iteration").get<int>(), e.at("component").get<std::size_t>()});
      }
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(std::string("model JSON: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& m) {
  write_file_atomic(path, serialize_model(m));
}

Model load_model(const std::filesystem::path& path) { return parse_model(read_file(path)); }

}  // namespace dogr
