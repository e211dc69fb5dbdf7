#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace medqa {

using Timestamp = std::chrono::system_clock::time_point;

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

// RFC 3986 percent-encoding of a query-string component.
std::string url_encode(std::string_view s);

// "2024-11-20T08:15:00Z"
std::string format_utc(Timestamp t);

// Hex SHA-256 of the UTF-8 bytes.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);

}  // namespace medqa
