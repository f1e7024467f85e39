#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace o2sr {

/// Ordered `key = value` pairs as they appear in config text.
using Entries = std::vector<std::pair<std::string, std::string>>;

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Malformed lines and repeated keys raise ConfigError.
Entries parse_entries(const std::string& text);

std::string format_entries(const Entries& entries);

/// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

int parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

} // namespace o2sr
