#include "dogr/dataset.hpp"

#include <algorithm>
#include <set>

#include "dogr/error.hpp"

namespace dogr {

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXd outcome,
                 std::vector<std::string> feature_names, std::string outcome_name)
    : features_(std::move(features)),
      outcome_(std::move(outcome)),
      feature_names_(std::move(feature_names)),
      outcome_name_(std::move(outcome_name)) {
  if (features_.rows() < 1 || features_.cols() < 1) {
    throw DataError("dataset needs at least one row and one feature");
  }
  if (outcome_.size() != features_.rows()) {
    throw DimensionError("outcome length " + std::to_string(outcome_.size()) +
                         " does not match " + std::to_string(features_.rows()) + " feature rows");
  }
  if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()) {
    throw DimensionError("expected " + std::to_string(features_.cols()) + " feature names, got " +
                         std::to_string(feature_names_.size()));
  }
  std::set<std::string> seen;
  for (const auto& name : feature_names_) {
    if (!seen.insert(name).second) {
      throw DataError("duplicate feature name '" + name + "'");
    }
  }
  if (seen.contains(outcome_name_)) {
    throw DataError("outcome name '" + outcome_name_ + "' is also a feature");
  }
  for (Eigen::Index i = 0; i < features_.rows(); ++i) {
    if (!features_.row(i).allFinite() || !std::isfinite(outcome_(i))) {
      throw DataError("non-finite value in row " + std::to_string(i + 1));
    }
  }
}

Dataset Dataset::subset(std::span<const Eigen::Index> indices) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Eigen::Index i = indices[r];
    if (i < 0 || i >= rows()) {
      throw DimensionError("subset index out of range");
    }
    x.row(static_cast<Eigen::Index>(r)) = features_.row(i);
    y(static_cast<Eigen::Index>(r)) = outcome_(i);
  }
  return Dataset(std::move(x), std::move(y), feature_names_, outcome_name_);
}

Dataset Dataset::select_features(const std::vector<std::string>& names) const {
  Eigen::MatrixXd x(rows(), static_cast<Eigen::Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto it = std::find(feature_names_.begin(), feature_names_.end(), names[c]);
    if (it == feature_names_.end()) {
      throw DimensionError("unknown feature '" + names[c] + "'");
    }
    x.col(static_cast<Eigen::Index>(c)) = features_.col(it - feature_names_.begin());
  }
  return Dataset(std::move(x), outcome_, names, outcome_name_);
}

}  // namespace dogr
