#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mohe {

// All randomness in the library flows through this wrapper so that every
// consumer (init, dropout, shuffling, eta splits) draws from a documented,
// reproducible scheme:
//   uniform01: take the top 53 bits of one mt19937_64 output, scale by 2^-53.
//   below(n):  one mt19937_64 output modulo n.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // [0, 1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // [0, n); n == 0 yields 0
    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

private:
    std::mt19937_64 gen_;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace detail

// Independent named streams derived from one user seed. Adding or removing a
// stream never perturbs the draws of another, which is what makes per-thread
// initialization and per-item dropout order-independent.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag) {
    return detail::splitmix64(seed ^ detail::fnv1a(tag));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = detail::splitmix64(seed ^ detail::fnv1a(tag));
    h = detail::splitmix64(h ^ a);
    return detail::splitmix64(h ^ b);
}

// In-place Fisher-Yates: for i = n-1 .. 1, j = rng.below(i+1), swap(v[i], v[j]).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace mohe
