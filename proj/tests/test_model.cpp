#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dogr/model.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::line_component;
using testing::model_of;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

dogr::Dataset dataset_1d(std::vector<double> xs, std::vector<double> ys) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  return dogr::Dataset(Eigen::Map<MatrixXd>(xs.data(), n, 1), Eigen::Map<VectorXd>(ys.data(), n),
                       {"x1"}, "y");
}

// Block-diagonal (p+1)-dimensional density of (x, y).
double block_normal_log_density(const dogr::Component& c, const VectorXd& x, double y) {
  const Eigen::Index p = c.dim();
  VectorXd point(p + 1), mean(p + 1);
  point << x, y;
  mean << c.mean, dogr::component_regression_value(c, x);
  MatrixXd cov = MatrixXd::Zero(p + 1, p + 1);
  cov.topLeftCorner(p, p) = c.covariance.matrix();
  cov(p, p) = c.residual_variance;
  return dogr::mvn_log_density(point, mean, dogr::SymmetricMatrix<double>(cov));
}

}  // namespace

TEST_CASE("component_regression_value examples") {
  auto c = line_component(1, 0, 1, 0, 1, 1);
  CHECK(dogr::component_regression_value(c, VectorXd::Constant(1, 5.0)) == 5.0);
  c.coefficients << -108.0, 1.03;
  CHECK(dogr::component_regression_value(c, VectorXd::Constant(1, 300.0)) ==
        doctest::Approx(201.0).epsilon(1e-14));

  dogr::Component two;
  two.mean = VectorXd::Zero(2);
  two.coefficients = (VectorXd(3) << 2, 3, -1).finished();
  CHECK(dogr::component_regression_value(two, (VectorXd(2) << 1, 4).finished()) == 1.0);
  CHECK_THROWS_AS(dogr::component_regression_value(two, VectorXd::Zero(3)), dogr::DimensionError);
}

TEST_CASE("joint_log_density examples") {
  const auto c = line_component(1, 0, 1, 0, 0, 1);
  CHECK(dogr::joint_log_density(c, VectorXd::Zero(1), 0.0) ==
        doctest::Approx(-1.8378770664093453).epsilon(1e-14));

  dogr::Rng rng(9);
  for (Eigen::Index p : {1, 2, 4}) {
    const auto comp = testing::random_component(rng, p);
    const double y = dogr::component_regression_value(comp, comp.mean);
    const double expected = -0.5 * static_cast<double>(p + 1) * kLog2Pi -
                            0.5 * std::log(comp.covariance.matrix().determinant()) -
                            0.5 * std::log(comp.residual_variance);
    CHECK(dogr::joint_log_density(comp, comp.mean, y) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("joint density equals the block-covariance normal") {
  dogr::Rng rng(10);
  for (int t = 0; t < 300; ++t) {
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.below(5));
    const auto c = testing::random_component(rng, p);
    const VectorXd x = c.mean + testing::gaussian_matrix(rng, p, 1);
    const double y = rng.normal() * 3.0;
    CHECK(std::abs(dogr::joint_log_density(c, x, y) - block_normal_log_density(c, x, y)) < 1e-9);
  }
}

TEST_CASE("log_likelihood examples") {
  SUBCASE("single component, single point at the mode") {
    const auto c = line_component(1.0, 2.0, 3.0, 1.0, 0.5, 0.7);
    const auto d = dataset_1d({2.0}, {2.0});
    CHECK(dogr::log_likelihood(model_of({c}), d) ==
          doctest::Approx(dogr::joint_log_density(c, VectorXd::Constant(1, 2.0), 2.0)).epsilon(1e-14));
  }
  SUBCASE("duplicating the data doubles the log-likelihood") {
    dogr::Rng rng(2);
    const auto d = testing::random_mixture_data(rng, 40, 2, 2);
    auto m = model_of({testing::random_component(rng, 2, 0.3), testing::random_component(rng, 2, 0.7)});
    MatrixXd x2(80, 2);
    x2 << d.features(), d.features();
    VectorXd y2(80);
    y2 << d.outcome(), d.outcome();
    const dogr::Dataset doubled(x2, y2, d.feature_names(), "y");
    CHECK(dogr::log_likelihood(m, doubled) ==
          doctest::Approx(2.0 * dogr::log_likelihood(m, d)).epsilon(1e-13));
  }
  SUBCASE("5-point, 2-component model against naive arithmetic") {
    const auto a = line_component(0.4, 0.0, 1.0, 1.0, 2.0, 0.5);
    const auto b = line_component(0.6, 2.0, 2.0, -1.0, 0.5, 1.0);
    const std::vector<double> xs{-0.5, 0.2, 1.1, 2.5, 3.0}, ys{0.3, 1.0, -0.2, 0.4, 3.5};
    double naive = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      naive += std::log(0.4 * oracle::joint_density_1d(a, xs[i], ys[i]) +
                        0.6 * oracle::joint_density_1d(b, xs[i], ys[i]));
    }
    CHECK(dogr::log_likelihood(model_of({a, b}), dataset_1d(xs, ys)) ==
          doctest::Approx(naive).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch") {
    dogr::Rng rng(1);
    const auto d = testing::random_mixture_data(rng, 10, 2, 1);
    CHECK_THROWS_AS(dogr::log_likelihood(model_of({line_component(1, 0, 1, 0, 1, 1)}), d),
                    dogr::DimensionError);
  }
}

TEST_CASE("e_step examples") {
  dogr::Rng rng(3);
  const auto d = testing::random_mixture_data(rng, 25, 2, 2);
  SUBCASE("K = 1 gives unit memberships") {
    const auto g = dogr::e_step(model_of({testing::random_component(rng, 2)}), d);
    CHECK((g.values.array() == 1.0).all());
  }
  SUBCASE("identical components return the mixing weights") {
    auto a = testing::random_component(rng, 2, 0.3);
    auto b = a;
    b.weight = 0.7;
    const auto g = dogr::e_step(model_of({a, b}), d);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      CHECK(g.values(i, 0) == doctest::Approx(0.3).epsilon(1e-12));
      CHECK(g.values(i, 1) == doctest::Approx(0.7).epsilon(1e-12));
    }
  }
  SUBCASE("hand-built 3-point case against density ratios") {
    const auto a = line_component(0.5, 0.0, 1.0, 0.0, 1.0, 1.0);
    const auto b = line_component(0.5, 1.0, 4.0, 2.0, -1.0, 0.5);
    const std::vector<double> xs{0.0, 1.0, 2.0}, ys{0.1, 1.2, -0.3};
    const auto g = dogr::e_step(model_of({a, b}), dataset_1d(xs, ys));
    for (std::size_t i = 0; i < 3; ++i) {
      const double fa = 0.5 * oracle::joint_density_1d(a, xs[i], ys[i]);
      const double fb = 0.5 * oracle::joint_density_1d(b, xs[i], ys[i]);
      CHECK(g.values(static_cast<Eigen::Index>(i), 0) == doctest::Approx(fa / (fa + fb)).epsilon(1e-12));
    }
  }
  SUBCASE("rows are normalized") {
    const auto m = model_of({testing::random_component(rng, 2, 0.2), testing::random_component(rng, 2, 0.5),
                             testing::random_component(rng, 2, 0.3)});
    const auto g = dogr::e_step(m, d);
    CHECK(((g.values.rowwise().sum().array() - 1.0).abs() < 1e-10).all());
    CHECK((g.values.array() >= 0.0).all());
    CHECK((g.values.array() <= 1.0).all());
  }
}

TEST_CASE("m_step with unit responsibilities reduces to classical estimators") {
  dogr::Rng rng(4);
  const auto d = testing::linear_data(rng, 60, 2);
  dogr::FitConfig cfg;
  cfg.covariance_ridge = 0.0;
  const auto comps = dogr::m_step(d, {MatrixXd::Ones(60, 1)}, cfg);
  REQUIRE(comps.size() == 1);
  const auto& c = comps[0];
  CHECK(c.weight == 1.0);
  const VectorXd mean = d.features().colwise().mean();
  CHECK((c.mean - mean).norm() < 1e-12);
  const MatrixXd centered = d.features().rowwise() - mean.transpose();
  const MatrixXd biased = centered.transpose() * centered / 60.0;
  CHECK((c.covariance.matrix() - biased).norm() < 1e-12);
  const auto ols = oracle::wls_normal_equations(d.features(), d.outcome(), VectorXd::Ones(60));
  for (int j = 0; j < 3; ++j) CHECK(c.coefficients(j) == doctest::Approx(ols[static_cast<std::size_t>(j)]).epsilon(1e-10));
  const VectorXd resid = d.outcome() - d.features() * c.coefficients.tail(2) -
                         VectorXd::Constant(60, c.coefficients(0));
  CHECK(c.residual_variance == doctest::Approx(resid.squaredNorm() / 60.0).epsilon(1e-12));
}

TEST_CASE("m_step on a hard partition equals per-blob fits") {
  dogr::Rng rng(5);
  const auto a = testing::linear_data(rng, 30, 1);
  const auto b = testing::linear_data(rng, 20, 1, 3.0);
  MatrixXd x(50, 1);
  x << a.features(), b.features().array() + 20.0;
  VectorXd y(50);
  y << a.outcome(), b.outcome();
  const dogr::Dataset d(x, y, {"x1"}, "y");
  MatrixXd gamma = MatrixXd::Zero(50, 2);
  gamma.col(0).head(30).setOnes();
  gamma.col(1).tail(20).setOnes();
  dogr::FitConfig cfg;
  cfg.covariance_ridge = 0.0;
  const auto comps = dogr::m_step(d, {gamma}, cfg);
  const auto alone = dogr::m_step(dogr::Dataset(x.bottomRows(20), y.tail(20), {"x1"}, "y"),
                                  {MatrixXd::Ones(20, 1)}, cfg)[0];
  CHECK(comps[1].weight == doctest::Approx(0.4));
  CHECK(comps[1].mean(0) == doctest::Approx(alone.mean(0)).epsilon(1e-12));
  CHECK(comps[1].covariance(0, 0) == doctest::Approx(alone.covariance(0, 0)).epsilon(1e-10));
  CHECK((comps[1].coefficients - alone.coefficients).norm() < 1e-10);
  CHECK(comps[1].residual_variance == doctest::Approx(alone.residual_variance).epsilon(1e-10));
}

TEST_CASE("m_step matches direct summation for random responsibilities") {
  dogr::Rng rng(6);
  const auto d = testing::random_mixture_data(rng, 10, 2, 2);
  MatrixXd gamma(10, 2);
  for (int i = 0; i < 10; ++i) {
    const auto row = rng.dirichlet_uniform(2);
    gamma(i, 0) = row[0];
    gamma(i, 1) = row[1];
  }
  dogr::FitConfig cfg;
  cfg.covariance_ridge = 0.0;
  const auto comps = dogr::m_step(d, {gamma}, cfg);
  for (int k = 0; k < 2; ++k) {
    double mass = 0, m0 = 0, m1 = 0;
    for (int i = 0; i < 10; ++i) {
      mass += gamma(i, k);
      m0 += gamma(i, k) * d.features()(i, 0);
      m1 += gamma(i, k) * d.features()(i, 1);
    }
    m0 /= mass;
    m1 /= mass;
    double s00 = 0, s01 = 0, s11 = 0;
    for (int i = 0; i < 10; ++i) {
      const double u = d.features()(i, 0) - m0, v = d.features()(i, 1) - m1;
      s00 += gamma(i, k) * u * u;
      s01 += gamma(i, k) * u * v;
      s11 += gamma(i, k) * v * v;
    }
    const auto& c = comps[static_cast<std::size_t>(k)];
    CHECK(std::abs(c.weight - mass / 10) < 1e-10);
    CHECK(std::abs(c.mean(0) - m0) < 1e-10);
    CHECK(std::abs(c.mean(1) - m1) < 1e-10);
    CHECK(std::abs(c.covariance(0, 0) - s00 / mass) < 1e-10);
    CHECK(std::abs(c.covariance(0, 1) - s01 / mass) < 1e-10);
    CHECK(std::abs(c.covariance(1, 1) - s11 / mass) < 1e-10);
    const auto beta = oracle::wls_normal_equations(d.features(), d.outcome(), gamma.col(k));
    double wss = 0;
    for (int i = 0; i < 10; ++i) {
      const double r = d.outcome()(i) - beta[0] - beta[1] * d.features()(i, 0) - beta[2] * d.features()(i, 1);
      wss += gamma(i, k) * r * r;
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(c.coefficients(j) - beta[static_cast<std::size_t>(j)]) < 1e-10);
    CHECK(std::abs(c.residual_variance - wss / mass) < 1e-10);
  }
}

TEST_CASE("m_step safeguards") {
  dogr::Rng rng(7);
  const auto d = testing::linear_data(rng, 20, 1);
  dogr::FitConfig cfg;
  SUBCASE("an empty column is a degenerate component") {
    MatrixXd gamma = MatrixXd::Zero(20, 2);
    gamma.col(0).setOnes();
    try {
      dogr::m_step(d, {gamma}, cfg);
      FAIL("expected DegenerateComponentError");
    } catch (const dogr::DegenerateComponentError& e) {
      CHECK(e.component() == 1);
    }
  }
  SUBCASE("covariance ridge is relative to the feature scale") {
    const auto c = dogr::m_step(d, {MatrixXd::Ones(20, 1)}, cfg)[0];
    const VectorXd centered = d.features().col(0).array() - d.features().col(0).mean();
    const double var = centered.squaredNorm() / 20.0;
    CHECK(c.covariance(0, 0) == doctest::Approx(var * (1.0 + 1e-6)).epsilon(1e-12));
  }
  SUBCASE("residual variance is floored") {
    MatrixXd x(5, 1);
    x << 1, 2, 3, 4, 5;
    const dogr::Dataset exact(x, (x.col(0).array() * 2.0 + 1.0).matrix(), {"x1"}, "y");
    cfg.residual_variance_floor = 1e-3;
    const auto c = dogr::m_step(exact, {MatrixXd::Ones(5, 1)}, cfg)[0];
    CHECK(c.residual_variance == 1e-3);
  }
  SUBCASE("constant feature is rescued by the ridge") {
    MatrixXd x = MatrixXd::Constant(10, 1, 4.0);
    const dogr::Dataset flat(x, VectorXd::LinSpaced(10, 0, 1), {"x1"}, "y");
    const auto c = dogr::m_step(flat, {MatrixXd::Ones(10, 1)}, cfg)[0];
    CHECK(c.covariance(0, 0) > 0.0);
    CHECK(c.coefficients.allFinite());
  }
}

TEST_CASE("fit with one component is ordinary least squares") {
  dogr::Rng rng(12);
  const auto d = testing::linear_data(rng, 80, 3);
  dogr::FitConfig cfg;
  const auto m = dogr::fit(d, cfg);
  CHECK(m.iterations <= 2);
  CHECK(m.converged);
  const auto ols = oracle::wls_normal_equations(d.features(), d.outcome(), VectorXd::Ones(80));
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(m.components[0].coefficients(j) - ols[static_cast<std::size_t>(j)]) < 1e-8);
  }
  CHECK(m.components[0].weight == 1.0);
}

TEST_CASE("fit recovers well separated means") {
  dogr::Rng rng(13);
  MatrixXd x(400, 1);
  VectorXd y(400);
  for (int i = 0; i < 400; ++i) {
    const bool left = i < 200;
    x(i, 0) = (left ? -50.0 : 50.0) + rng.normal();
    y(i) = (left ? 1.0 + 2.0 * x(i, 0) : -3.0 + 0.5 * x(i, 0)) + 0.3 * rng.normal();
  }
  const dogr::Dataset d(x, y, {"x1"}, "y");
  dogr::FitConfig cfg;
  cfg.n_components = 2;
  cfg.seed = 1;
  SUBCASE("random responsibilities with restarts") { cfg.n_restarts = 3; }
  SUBCASE("k-means initialization") { cfg.init_strategy = dogr::InitStrategy::kmeans_on_xy; }
  const auto m = dogr::fit(d, cfg);
  std::vector<double> means{m.components[0].mean(0), m.components[1].mean(0)};
  std::sort(means.begin(), means.end());
  CHECK(std::abs(means[0] + 50.0) < 0.5);
  CHECK(std::abs(means[1] - 50.0) < 0.5);
}

TEST_CASE("fit properties on random mixtures") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    dogr::Rng rng(100 + seed);
    const auto d = testing::random_mixture_data(rng, 200, 2, 2);
    dogr::FitConfig cfg;
    cfg.n_components = 2 + seed % 2;
    cfg.seed = seed;
    const auto m = dogr::fit(d, cfg);
    CAPTURE(seed);

    // EM monotonicity
    for (std::size_t t = 1; t < m.fit_trace.size(); ++t) {
      CHECK(m.fit_trace[t] >= m.fit_trace[t - 1] - 1e-8);
    }
    // mixing weights sum to one
    double total = 0;
    for (const auto& c : m.components) total += c.weight;
    CHECK(std::abs(total - 1.0) < 1e-12);
    // final trace entry is the model's log-likelihood
    CHECK(dogr::log_likelihood(m, d) == doctest::Approx(m.final_log_likelihood()).epsilon(1e-12));

    // beta_k minimizes the responsibility-weighted sum of squares
    const auto gamma = dogr::e_step(m, d);
    dogr::Model prev = m;
    const auto next = dogr::m_step(d, gamma, cfg);
    for (std::size_t k = 0; k < next.size(); ++k) {
      const VectorXd w = gamma.values.col(static_cast<Eigen::Index>(k));
      auto wss = [&](const VectorXd& beta) {
        const VectorXd r = d.outcome() - d.features() * beta.tail(2) -
                           VectorXd::Constant(d.rows(), beta(0));
        return (w.array() * r.array().square()).sum();
      };
      const double best = wss(next[k].coefficients);
      for (int t = 0; t < 100; ++t) {
        VectorXd delta = testing::gaussian_matrix(rng, 3, 1);
        delta *= 0.1 * rng.uniform() / delta.norm();
        CHECK(wss(next[k].coefficients + delta) >= best);
      }
    }

    // one more EM cycle barely moves a converged model
    if (m.converged) {
      prev.components = next;
      const double after = dogr::log_likelihood(prev, d);
      CHECK(std::abs(after - m.final_log_likelihood()) <
            cfg.rel_tolerance * std::abs(m.final_log_likelihood()));
    }
  }
}

TEST_CASE("fit is deterministic") {
  dogr::Rng rng(14);
  const auto d = testing::random_mixture_data(rng, 150, 2, 3);
  for (auto init : {dogr::InitStrategy::random_responsibilities, dogr::InitStrategy::kmeans_on_xy}) {
    dogr::FitConfig cfg;
    cfg.n_components = 3;
    cfg.seed = 77;
    cfg.n_restarts = 2;
    cfg.init_strategy = init;
    const auto a = dogr::fit(d, cfg);
    const auto b = dogr::fit(d, cfg);
    CHECK(a.fit_trace == b.fit_trace);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(a.components[k].coefficients == b.components[k].coefficients);
      CHECK(a.components[k].covariance == b.components[k].covariance);
      CHECK(a.components[k].mean == b.components[k].mean);
    }
  }
}

TEST_CASE("restarts keep the best log-likelihood") {
  dogr::Rng rng(15);
  const auto d = testing::random_mixture_data(rng, 150, 1, 3);
  dogr::FitConfig cfg;
  cfg.n_components = 3;
  double best_single = -INFINITY;
  for (int r = 0; r < 3; ++r) {
    cfg.seed = 40 + static_cast<std::uint64_t>(r);
    best_single = std::max(best_single, dogr::fit(d, cfg).final_log_likelihood());
  }
  cfg.seed = 40;
  cfg.n_restarts = 3;
  CHECK(dogr::fit(d, cfg).final_log_likelihood() == best_single);
}

TEST_CASE("k-means initialization yields softened one-hot rows") {
  dogr::Rng rng(16);
  const auto d = testing::random_mixture_data(rng, 60, 2, 3);
  dogr::FitConfig cfg;
  cfg.n_components = 3;
  cfg.init_strategy = dogr::InitStrategy::kmeans_on_xy;
  dogr::Rng init_rng(1);
  const auto g = dogr::initial_responsibilities(d, cfg, init_rng);
  for (Eigen::Index i = 0; i < 60; ++i) {
    CHECK(g.values.row(i).maxCoeff() == 0.9);
    CHECK(g.values.row(i).sum() == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("fit error paths") {
  dogr::Rng rng(17);
  const auto d = testing::linear_data(rng, 12, 2);
  dogr::FitConfig cfg;
  cfg.n_components = 3;  // needs N > 3 * (2 + 2) = 12
  CHECK_THROWS_AS(dogr::fit(d, cfg), dogr::InsufficientDataError);

  cfg.n_components = 0;
  CHECK_THROWS_AS(dogr::fit(d, cfg), dogr::ConfigError);

  // Every component sits below a 90% mass floor: the first is re-seeded once,
  // then the collapse repeats and EM gives up at iteration 0.
  const auto big = testing::linear_data(rng, 100, 1);
  cfg.n_components = 2;
  cfg.min_component_weight = 0.9;
  try {
    dogr::fit(big, cfg);
    FAIL("expected FitError");
  } catch (const dogr::FitError& e) {
    CHECK(e.iteration() == 0);
  }
}
