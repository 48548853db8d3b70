#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace noilin {

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace noilin
