#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tclflex::io {

// Shortest decimal text that parses back to the same double (%.17g).
std::string exact(double value);

// Splits one CSV line on commas; no quoting support.
std::vector<std::string> split_csv(std::string_view line);

// Parses a double; throws InvalidInput with `context` on malformed text.
double parse_double(std::string_view text, std::string_view context);

void write_file(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace tclflex::io
