#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <system_error>

namespace droplet {

// Shortest representation that parses back to the same double; locale independent.
inline std::string format_double(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        return "nan";
    }
    return std::string(buf, end);
}

} // namespace droplet
