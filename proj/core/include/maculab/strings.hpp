#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace maculab {

std::vector<std::string> split(std::string_view line, char sep);
std::string join(const std::vector<std::string>& fields, char sep);

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double_roundtrip(double v);

/// Strict parses; nullopt on any trailing garbage or empty input.
std::optional<double> parse_double(std::string_view s);
std::optional<long> parse_long(std::string_view s);

std::string trim(std::string_view s);

}  // namespace maculab
