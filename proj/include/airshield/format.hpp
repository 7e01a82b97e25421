#pragma once

#include <string>
#include <string_view>

namespace airshield {

// Locale-independent number rendering.
std::string format_significant(double value, int digits);
std::string format_fixed(double value, int decimals);

/// Parses a full decimal token; throws std::invalid_argument otherwise.
double parse_double(std::string_view text);

}  // namespace airshield
