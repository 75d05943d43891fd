#pragma once

#include <charconv>
#include <string>

namespace noisylab::detail {

/// Shortest decimal form that round-trips the exact double. Keeps CSV output
/// both lossless and free of trailing representation noise.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace noisylab::detail
