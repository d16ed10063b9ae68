#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tebkit {

/// Shortest decimal string that parses back to exactly `value`.
/// NaN is written as "nan" and infinities as "inf" / "-inf".
std::string format_double(double value);

/// Parses the output of format_double (and ordinary decimal literals).
double parse_double(std::string_view text);
std::uint64_t parse_uint(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);
std::string join(const std::vector<std::string>& parts, char sep);

std::string_view trim(std::string_view text);

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

}  // namespace tebkit
