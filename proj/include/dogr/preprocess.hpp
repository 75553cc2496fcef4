#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dogr/dataset.hpp"

namespace dogr {

// ---- CSV ------------------------------------------------------------------

/// Header plus an all-numeric body. Quoted fields (RFC 4180) are accepted;
/// every body cell must parse as a finite decimal.
struct NumericTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
};

NumericTable parse_numeric_csv(std::string_view text);
NumericTable read_numeric_csv(const std::filesystem::path& path);

/// Dataset whose features are every non-outcome column, in header order.
Dataset dataset_from_table(const NumericTable& table, const std::string& outcome_column);
Dataset parse_csv(std::string_view text, const std::string& outcome_column);
Dataset load_csv(const std::filesystem::path& path, const std::string& outcome_column);

/// Features then outcome, one row per observation.
std::string dataset_csv(const Dataset& d, int precision = 17);
void save_csv(const std::filesystem::path& path, const Dataset& d, int precision = 17);

// ---- VIF pruning -------------------------------------------------------------

struct VifEntry {
  std::string feature;
  double vif = 0.0;
};

struct VifReport {
  double threshold = 5.0;
  std::vector<VifEntry> removed;  // in removal order
  std::vector<VifEntry> kept;
};

/// R^2 at or above 1 - kVifCollinearTolerance counts as perfect collinearity.
inline constexpr double kVifCollinearTolerance = 1e-12;

/// VIF_j = 1 / (1 - R_j^2), regressing column j on the others plus an
/// intercept. A single column has VIF 1.
std::vector<double> variance_inflation_factors(const Eigen::MatrixXd& x);

/// Drops the highest-VIF feature (ties to the smallest name) while it exceeds
/// the threshold, recomputing after every removal.
std::pair<Dataset, VifReport> vif_prune(const Dataset& d, double threshold = 5.0);

std::string vif_report_json(const VifReport& r);

// ---- Synthetic data -------------------------------------------------------------

/// Per component c: size_c points with x ~ N(x_means[c], diag(x_variances[c]))
/// and y = intercepts[c] + slopes[c].x + e, e ~ N(0, residual_variance).
/// Defaults reproduce the two-subgroup benchmark: sizes 3000/2000, x mean 500,
/// x variances 100/600, lines y = 200 + x and y = 800 + x, residual variance 20.
struct SyntheticSpec {
  std::vector<std::size_t> component_sizes{3000, 2000};
  std::vector<Eigen::VectorXd> x_means{Eigen::VectorXd::Constant(1, 500.0),
                                       Eigen::VectorXd::Constant(1, 500.0)};
  std::vector<Eigen::VectorXd> x_variances{Eigen::VectorXd::Constant(1, 100.0),
                                           Eigen::VectorXd::Constant(1, 600.0)};
  std::vector<double> intercepts{200.0, 800.0};
  std::vector<Eigen::VectorXd> slopes{Eigen::VectorXd::Constant(1, 1.0),
                                      Eigen::VectorXd::Constant(1, 1.0)};
  double residual_variance = 20.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Rows are shuffled with the same seeded stream. Features are named "x"
/// (p = 1) or "x1".."xp"; the outcome is "y".
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace dogr
