#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace metajudge::detail {

inline std::uint64_t fnv1a64(std::string_view data,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

inline std::string fnv1a64_hex(std::string_view data) { return to_hex(fnv1a64(data)); }

}  // namespace metajudge::detail
