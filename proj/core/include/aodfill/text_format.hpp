#pragma once

#include <charconv>
#include <string>
#include <string_view>

namespace aodfill {

/// Shortest decimal text that parses back to the identical double.
/// Shared by every text writer so repeated runs emit identical bytes.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, out);
    return res.ec == std::errc{} && res.ptr == end;
}

} // namespace aodfill
