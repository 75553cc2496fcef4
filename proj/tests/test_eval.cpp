#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "dogr/error.hpp"
#include "dogr/eval.hpp"
#include "test_support.hpp"

using Eigen::VectorXd;

TEST_CASE("rmse and mae examples") {
  const VectorXd a = (VectorXd(3) << 1, 2, 3).finished();
  CHECK(dogr::rmse(a, a) == 0.0);
  CHECK(dogr::mae(a, a) == 0.0);

  const VectorXd z = VectorXd::Zero(2);
  const VectorXd s = (VectorXd(2) << 3, -3).finished();
  CHECK(dogr::rmse(z, s) == 3.0);
  CHECK(dogr::mae(z, s) == 3.0);

  const VectorXd p = (VectorXd(3) << 2, 2, 5).finished();
  CHECK(dogr::rmse(a, p) == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-15));
  CHECK(dogr::rmse(a, p) == doctest::Approx(1.29099).epsilon(1e-5));
  CHECK(dogr::mae(a, p) == 1.0);

  CHECK_THROWS_AS(dogr::rmse(a, z), dogr::DimensionError);
  CHECK_THROWS_AS(dogr::mae(VectorXd(), VectorXd()), dogr::DimensionError);
}

TEST_CASE("fold partition invariants") {
  for (Eigen::Index n : {5, 10, 17, 103}) {
    for (std::size_t folds : {2u, 3u, 5u}) {
      const auto parts = dogr::partition_folds(n, folds, 7);
      REQUIRE(parts.size() == folds);
      std::set<Eigen::Index> seen;
      std::size_t lo = SIZE_MAX, hi = 0;
      for (const auto& f : parts) {
        lo = std::min(lo, f.size());
        hi = std::max(hi, f.size());
        CHECK(std::is_sorted(f.begin(), f.end()));
        for (auto i : f) CHECK(seen.insert(i).second);
      }
      CHECK(static_cast<Eigen::Index>(seen.size()) == n);
      CHECK(*seen.begin() == 0);
      CHECK(*seen.rbegin() == n - 1);
      CHECK(hi - lo <= 1);
    }
  }
  CHECK(dogr::partition_folds(50, 5, 1) == dogr::partition_folds(50, 5, 1));
  CHECK(dogr::partition_folds(50, 5, 1) != dogr::partition_folds(50, 5, 2));
  CHECK_THROWS_AS(dogr::partition_folds(3, 5, 1), dogr::ConfigError);
}

TEST_CASE("nested cv on a toy set has one row per fold") {
  dogr::Rng rng(1);
  const auto d = testing::linear_data(rng, 10, 1);
  dogr::CvConfig cv;
  cv.outer_folds = 2;
  cv.inner_folds = 5;
  cv.k_grid = {1};
  const auto r = dogr::nested_cv(d, cv, dogr::FitConfig{});
  CHECK(r.per_fold.size() == 2);
}

TEST_CASE("nested cv on single-line data prefers one component") {
  dogr::Rng rng(2);
  const auto d = testing::linear_data(rng, 400, 2, 1.0);
  dogr::CvConfig cv;
  cv.k_grid = {1, 2};
  cv.seed = 3;
  const auto r = dogr::nested_cv(d, cv, dogr::FitConfig{});
  REQUIRE(r.per_fold.size() == 5);
  int ones = 0;
  for (const auto& f : r.per_fold) ones += f.chosen_k == 1;
  CHECK(ones >= 4);
  CHECK(std::abs(r.dogr.mean_rmse - r.baseline.mean_rmse) <= 0.02 * r.baseline.mean_rmse);
}

TEST_CASE("nested cv report properties") {
  dogr::Rng rng(4);
  const auto d = testing::random_mixture_data(rng, 240, 1, 2);
  dogr::CvConfig cv;
  cv.outer_folds = 4;
  cv.inner_folds = 3;
  cv.repeats = 2;
  cv.k_grid = {1, 2, 3};
  cv.seed = 11;
  const auto r = dogr::nested_cv(d, cv, dogr::FitConfig{});
  REQUIRE(r.per_fold.size() == 8);

  for (std::size_t rep = 0; rep < 2; ++rep) {
    std::set<Eigen::Index> covered;
    for (const auto& f : r.per_fold) {
      if (f.repeat != rep) continue;
      CHECK_FALSE(f.failed);
      for (auto i : f.test_indices) CHECK(covered.insert(i).second);
      // train and test are complementary
      std::set<Eigen::Index> all(f.train_indices.begin(), f.train_indices.end());
      for (auto i : f.test_indices) CHECK(all.insert(i).second);
      CHECK(static_cast<Eigen::Index>(all.size()) == d.rows());
    }
    CHECK(static_cast<Eigen::Index>(covered.size()) == d.rows());
  }

  for (const auto& f : r.per_fold) {
    CHECK(f.rmse >= f.mae);
    CHECK(f.mae >= 0.0);
    CHECK(f.baseline_rmse >= f.baseline_mae);
    CHECK(f.inner_rmse.size() == 3);
    CHECK(std::find(cv.k_grid.begin(), cv.k_grid.end(), f.chosen_k) != cv.k_grid.end());
    // metrics agree with the stored predictions
    VectorXd truth(static_cast<Eigen::Index>(f.test_indices.size()));
    for (std::size_t t = 0; t < f.test_indices.size(); ++t) {
      truth(static_cast<Eigen::Index>(t)) = d.outcome()(f.test_indices[t]);
    }
    CHECK(dogr::rmse(truth, f.predictions) == f.rmse);
    CHECK(dogr::mae(truth, f.baseline_predictions) == f.baseline_mae);
    // the chosen K has the smallest inner RMSE
    const std::size_t chosen = static_cast<std::size_t>(
        std::find(cv.k_grid.begin(), cv.k_grid.end(), f.chosen_k) - cv.k_grid.begin());
    for (double v : f.inner_rmse) {
      if (!std::isnan(v)) CHECK(f.inner_rmse[chosen] <= v);
    }
  }

  double mean = 0;
  for (const auto& f : r.per_fold) mean += f.rmse;
  mean /= 8;
  CHECK(r.dogr.mean_rmse == doctest::Approx(mean).epsilon(1e-12));
  double ss = 0;
  for (const auto& f : r.per_fold) ss += (f.rmse - mean) * (f.rmse - mean);
  CHECK(r.dogr.std_rmse == doctest::Approx(std::sqrt(ss / 7)).epsilon(1e-10));

  SUBCASE("deterministic across thread counts") {
    cv.threads = 3;
    const auto again = dogr::nested_cv(d, cv, dogr::FitConfig{});
    CHECK(dogr::eval_report_json(again) == dogr::eval_report_json(r));
  }
  SUBCASE("predictions csv covers every row once per repeat") {
    const auto csv = dogr::predictions_csv(r, d, cv.outer_folds);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "row,y_true,y_pred_dogr,y_pred_mlr,fold");
    int count = 0;
    while (std::getline(in, line)) ++count;
    CHECK(count == 2 * 240);
  }
  SUBCASE("json and table mention both methods") {
    const auto json = dogr::eval_report_json(r);
    CHECK(json.find("\"baseline\"") != std::string::npos);
    CHECK(dogr::eval_report_table(r).find("MLR") != std::string::npos);
  }
}

TEST_CASE("derived seeds differ per stream") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 10; ++a)
    for (std::uint64_t b = 0; b < 10; ++b) CHECK(seen.insert(dogr::derive_seed(42, a, b)).second);
  CHECK(dogr::derive_seed(1, 2, 3) == dogr::derive_seed(1, 2, 3));
}

TEST_CASE("invalid cv configuration") {
  dogr::CvConfig cv;
  cv.outer_folds = 1;
  CHECK_THROWS_AS(cv.validate(), dogr::ConfigError);
  cv = {};
  cv.k_grid.clear();
  CHECK_THROWS_AS(cv.validate(), dogr::ConfigError);
}
