#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cdae::io {

/// Whole file as bytes; DataError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Lines split on '\n' with a trailing '\r' removed.
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

/// Shortest decimal form that round-trips the double exactly.
std::string format_double(double v);

}  // namespace cdae::io
