#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kuafu {

// splitmix64; used everywhere randomness is needed so that corpora, attacks
// and experiments replay bit-exactly on any platform (std:: distributions are
// implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) { return next_unit() < p; }

    // uniform in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // 64-bit multiply-shift; bias is negligible for our n
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

// Stable 64-bit hash (FNV-1a) for deriving per-sample / per-feature seeds.
inline std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    Rng mix(base ^ stable_hash(tag));
    return mix.next_u64();
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    Rng mix(base ^ stable_hash(tag) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    return mix.next_u64();
}

} // namespace kuafu
