#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace predinv {

// 64-bit FNV-1a. Used for per-component seed derivation and artifact fingerprints.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

// Deterministic RNG. All float draws are hand-rolled from mt19937 words so that
// results do not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

    std::uint32_t next_u32() { return eng_(); }

    // uniform in [0,1) with 24 bits of resolution
    float unit() { return static_cast<float>(eng_() >> 8) * (1.0f / 16777216.0f); }

    float uniform(float lo, float hi) { return lo + (hi - lo) * unit(); }

    // integer in [0,n) via Lemire reduction; deterministic, no modulo bias worth caring about here
    std::size_t below(std::size_t n) {
        return static_cast<std::size_t>((static_cast<std::uint64_t>(eng_()) * n) >> 32);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937 eng_;
};

// Independent stream for a named role under one experiment seed.
inline Rng derive_rng(std::uint64_t seed, std::string_view role, std::uint64_t index = 0) {
    std::uint64_t h = fnv1a(role);
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h ^= index * 0xff51afd7ed558ccdull;
    return Rng(h);
}

}  // namespace predinv
