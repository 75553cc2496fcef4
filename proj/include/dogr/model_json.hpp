#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dogr/model.hpp"

namespace dogr {

inline constexpr int kModelFormatVersion = 1;

/// Model as JSON text:
///   {version, feature_names, outcome_name,
///    components: [{weight, mean, covariance (row-major), coefficients,
///                  residual_variance, standard_errors}],
///    fit: {log_likelihood_trace, converged, iterations, config, reseeds}}
/// Doubles are written in shortest round-trip form, so parsing restores them
/// bit for bit.
std::string serialize_model(const Model& m);
Model parse_model(std::string_view text);

void save_model(const std::filesystem::path& path, const Model& m);
Model load_model(const std::filesystem::path& path);

}  // namespace dogr
