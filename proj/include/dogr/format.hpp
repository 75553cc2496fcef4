#pragma once

#include <filesystem>
#include <string>

namespace dogr {

/// Locale-independent general-format rendering with `precision` significant
/// digits. 17 digits round-trip every double.
std::string format_double(double value, int precision = 17);

/// Writes `contents` to a temporary sibling and renames it over `path`, so a
/// failed run never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace dogr
