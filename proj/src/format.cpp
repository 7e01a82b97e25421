#include "airshield/format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace airshield {

std::string format_significant(double value, int digits) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::general, digits);
    return {buf.data(), res.ptr};
}

std::string format_fixed(double value, int decimals) {
    std::array<char, 400> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                   std::chars_format::fixed, decimals);
    std::string out(buf.data(), res.ptr);
    // "-0.00" -> "0.00"
    if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
    return out;
}

double parse_double(std::string_view text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last || first == last) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace airshield
