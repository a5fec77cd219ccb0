#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace oodcal {

// Derives independent child seeds from a parent seed and a stage tag so that
// every stage owns a named random stream.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag, std::uint64_t index);

// 64-bit FNV-1a over bytes; used for cache keys and stage hashes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL);

// Thin wrapper around mt19937_64. Distributions are computed from raw engine
// output here instead of via <random> distributions, whose algorithms are
// implementation-defined; this keeps streams identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace oodcal
