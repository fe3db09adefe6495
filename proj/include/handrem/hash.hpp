#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace handrem {

/// Incremental 64-bit FNV-1a over a canonical byte stream. Doubles are fed
/// by bit pattern, integers little-endian, strings length-prefixed.
class Fnv1a {
public:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t kPrime = 0x00000100000001b3ULL;

    Fnv1a& bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= kPrime;
        }
        return *this;
    }

    Fnv1a& u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) {
            b[i] = static_cast<unsigned char>(v >> (8 * i));
        }
        return bytes(b, 8);
    }

    Fnv1a& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
    Fnv1a& boolean(bool v) { return u64(v ? 1 : 0); }

    Fnv1a& f64(double v) {
        // +0 and -0 compare equal and must hash equal
        if (v == 0.0) {
            v = 0.0;
        }
        return u64(std::bit_cast<std::uint64_t>(v));
    }

    Fnv1a& str(std::string_view s) {
        u64(s.size());
        return bytes(s.data(), s.size());
    }

    [[nodiscard]] std::uint64_t digest() const { return hash_; }

private:
    std::uint64_t hash_ = kOffset;
};

[[nodiscard]] inline std::uint64_t fnv1a(std::string_view s) {
    return Fnv1a{}.bytes(s.data(), s.size()).digest();
}

[[nodiscard]] std::string toHex(std::uint64_t v);
[[nodiscard]] std::uint64_t fromHex(std::string_view s);

} // namespace handrem
