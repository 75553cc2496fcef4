#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dogr {

/// Feature matrix (N x p) plus outcome vector, with column names. Immutable
/// once constructed; construction rejects non-finite values, duplicate
/// names and empty shapes.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd features, Eigen::VectorXd outcome, std::vector<std::string> feature_names,
          std::string outcome_name);

  const Eigen::MatrixXd& features() const { return features_; }
  const Eigen::VectorXd& outcome() const { return outcome_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::string& outcome_name() const { return outcome_name_; }

  Eigen::Index rows() const { return features_.rows(); }
  Eigen::Index cols() const { return features_.cols(); }

  /// Rows picked by index, in the given order.
  Dataset subset(std::span<const Eigen::Index> indices) const;

  /// Same rows, keeping only the named feature columns (in the given order).
  Dataset select_features(const std::vector<std::string>& names) const;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd outcome_;
  std::vector<std::string> feature_names_;
  std::string outcome_name_;
};

}  // namespace dogr
