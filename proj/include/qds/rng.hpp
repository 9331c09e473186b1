#pragma once

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <vector>

namespace qds {

// splitmix64 step; used for state initialization and seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// xoshiro256** with explicit seeding. Every stochastic operation in this
// codebase takes a seed and constructs one of these locally; there is no
// global RNG state, so results are reproducible and callers may run
// concurrently. Child streams are derived with derive(), which keeps
// sharded Monte Carlo runs independent of worker count.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // uniform in [0, 1) with 53 random bits
    double uniform_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform_double() < p; }

    // unbiased uniform integer in [0, n); Lemire multiply-shift with rejection
    std::uint64_t uniform_index(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t t = (0 - n) % n;
            while (low < t) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // deterministic child seed for a numbered stream
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (stream + 1));
        std::uint64_t a = splitmix64(s);
        return splitmix64(s) ^ a;
    }

    // deterministic child seed for a named stream
    static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
        // FNV-1a over the tag selects the stream number
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : tag) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return derive(seed, h);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t state_[4];
};

// Successes in n independent Bernoulli(p) trials. Plain loop: exact, and
// fast enough for the n used here (<= a few thousand per call).
inline long binomial_count(Rng& rng, long n, double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    long count = 0;
    for (long i = 0; i < n; ++i) count += rng.bernoulli(p) ? 1 : 0;
    return count;
}

// Marked items found when drawing `draws` items without replacement from a
// population of `total` containing `marked` marked items.
inline long hypergeometric_count(Rng& rng, long total, long marked, long draws) {
    long count = 0;
    long remaining = total;
    long marked_left = marked;
    for (long d = 0; d < draws; ++d, --remaining) {
        if (marked_left == 0) break;
        if (marked_left == remaining) {
            count += draws - d;
            break;
        }
        if (rng.uniform_index(static_cast<std::uint64_t>(remaining)) <
            static_cast<std::uint64_t>(marked_left)) {
            ++count;
            --marked_left;
        }
    }
    return count;
}

// Uniformly random k-subset of {0, ..., n-1}, sorted ascending.
inline std::vector<std::uint32_t> sample_subset(Rng& rng, std::uint32_t n, std::uint32_t k) {
    std::vector<std::uint32_t> idx(n);
    for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
    for (std::uint32_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::uint32_t>(rng.uniform_index(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace qds
