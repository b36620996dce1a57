#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace sscp {

/// Locale-independent parse of a whole string as a double. Returns nullopt
/// on trailing garbage or an empty string. "inf"/"nan" spellings parse.
std::optional<double> parse_double(std::string_view text);

/// Shortest round-trip text for a double ("inf", "-inf", "nan" for
/// non-finite values).
std::string format_double(double value);

std::string join(std::span<const std::string> parts, std::string_view sep);

}  // namespace sscp
