#pragma once

#include <charconv>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace advlab {

inline constexpr const char* kVersion = "0.1.0";

// All runtime contract violations throw this; tests assert on the message.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class T, class... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    format_into(os, rest...);
}
}  // namespace detail

template <class... Parts>
[[noreturn]] void fail(const Parts&... parts) {
    std::ostringstream os;
    detail::format_into(os, parts...);
    throw Error(os.str());
}

#define ADVLAB_CHECK(cond, ...)                   \
    do {                                          \
        if (!(cond)) ::advlab::fail(__VA_ARGS__); \
    } while (0)

using Shape = std::vector<int>;

inline int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

// Log arguments are clamped at this floor before taking the log. The value
// tracks the working precision: what is representable noise in float is a
// legitimate probability in double.
template <class S>
inline constexpr S prob_floor = S(1e-12);
template <>
inline constexpr float prob_floor<float> = 1e-7f;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline uint64_t parse_hex64(const std::string& s) {
    ADVLAB_CHECK(s.size() == 16, "expected a 16-digit hex value, got '", s, "'");
    uint64_t v = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else fail("bad hex digit '", c, "' in '", s, "'");
        v = (v << 4) | uint64_t(d);
    }
    return v;
}

// Shortest decimal form that round-trips the exact double. Every file the
// tools emit goes through this, so reruns produce identical bytes.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace advlab
