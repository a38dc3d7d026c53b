#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace reasonq {

using Json = nlohmann::json;

/// Canonical JSON bytes: object keys in byte order, no insignificant
/// whitespace, UTF-8 strings passed through unescaped (only the escapes JSON
/// requires), integers as integers, and floating-point values in the
/// shortest decimal form that round-trips (std::to_chars). Non-finite
/// numbers are rejected.
std::string canonical_dump(const Json& value);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Shortest round-trip decimal for a double.
std::string format_double(double value);

}  // namespace reasonq
