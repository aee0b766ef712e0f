#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace s2c {

// Counter-based stream derivation: every consumer derives its generator from
// (seed, purpose, indices...) so results do not depend on scheduling, worker
// count, or call order. splitmix64 is the mixing function.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t mix_key(uint64_t acc, uint64_t v) { return splitmix64(acc ^ splitmix64(v)); }

inline uint64_t stream_key(uint64_t seed) { return splitmix64(seed); }

template <typename... Ts>
uint64_t stream_key(uint64_t seed, Ts... parts) {
    uint64_t acc = splitmix64(seed);
    ((acc = mix_key(acc, static_cast<uint64_t>(parts))), ...);
    return acc;
}

// FNV-1a over raw bytes, used to key per-sequence streams by content.
inline uint64_t fnv1a(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

template <typename T>
uint64_t fnv1a_span(std::span<const T> v) {
    return fnv1a(v.data(), v.size() * sizeof(T));
}

// Deterministic generator with pinned sampling primitives. mt19937_64 output
// is fully specified by the standard; the double and categorical mappings are
// pinned here so results are identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t key) : gen_(key) {}

    uint64_t bits() { return gen_(); }

    // Uniform in [0,1) with 53-bit resolution.
    double unif01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * unif01(); }

    // Uniform integer in [0,n). Uses the unif01 mapping; bias is O(n/2^53).
    int uniform_int(int n) {
        int v = static_cast<int>(unif01() * n);
        return v >= n ? n - 1 : v;
    }

    // Categorical draw by CDF scan. Weights need not sum exactly to one;
    // the last positive-weight index absorbs rounding remainder.
    int categorical(std::span<const double> w) {
        double u = unif01();
        double acc = 0.0;
        int last = 0;
        for (size_t i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) last = static_cast<int>(i);
            acc += w[i];
            if (u < acc) return static_cast<int>(i);
        }
        return last;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace s2c
