#pragma once

#include <cstdio>
#include <string>

namespace poseret::detail {

/// Shortest decimal form that round-trips a binary64 exactly.
inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace poseret::detail
