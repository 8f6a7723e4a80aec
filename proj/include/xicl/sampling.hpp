#pragma once

// Seeded demonstration sampling.
//
// Generator: std::mt19937_64 seeded from std::seed_seq{seed_lo, seed_hi,
// ordinal_lo, ordinal_hi} (32-bit halves of the run seed and the 0-based query
// ordinal). Both the engine's state transition and seed_seq::generate are fully
// specified by the C++ standard, so the stream is identical on every conforming
// platform.
//
// Bounded draw below(n): reject raw 64-bit outputs >= 2^64 - (2^64 mod n), then
// take the remainder. Selection: partial Fisher-Yates over support positions,
// for i in [0, k): j = i + below(n - i); swap(pos[i], pos[j]).

#include <xicl/corpus.hpp>

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace xicl {

class QueryRng {
public:
    QueryRng(std::uint64_t seed, std::uint64_t ordinal) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(ordinal), static_cast<std::uint32_t>(ordinal >> 32)};
        engine_.seed(seq);
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        // (2^64 - n) % n == 2^64 % n
        const std::uint64_t rejected = (max - n + 1) % n;
        const std::uint64_t limit = max - rejected;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x > limit);
        return x % n;
    }

private:
    std::mt19937_64 engine_;
};

/// First `k` positions of a seeded partial Fisher-Yates shuffle of [0, n).
inline std::vector<std::size_t> sample_positions(std::size_t n, std::size_t k, std::uint64_t seed,
                                                 std::uint64_t ordinal) {
    if (k > n) {
        throw DataError("cannot sample " + std::to_string(k) + " demonstrations from a support set of " +
                        std::to_string(n));
    }
    std::vector<std::size_t> pos(n);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    QueryRng rng(seed, ordinal);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pos[i], pos[j]);
    }
    pos.resize(k);
    return pos;
}

/// `k` support ids drawn uniformly without replacement, in draw order.
inline std::vector<std::string> random_sample(std::span<const Record> support, std::size_t k, std::uint64_t seed,
                                              std::uint64_t query_ordinal) {
    std::vector<std::string> ids;
    ids.reserve(k);
    for (auto p : sample_positions(support.size(), k, seed, query_ordinal)) ids.push_back(support[p].id);
    return ids;
}

}  // namespace xicl
