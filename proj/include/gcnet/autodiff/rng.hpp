#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace gcnet {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a, used to turn stream labels into integers.
std::uint64_t hash_label(std::string_view label);

/// Sub-seed for the stream named `label` (and `index`) under `master`.
/// Unrelated labels give unrelated streams, so adding a new consumer never
/// shifts the numbers an existing one sees.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label, std::uint64_t index = 0);

/// Counter-based generator: output k is mix64(seed + (k+1) * golden).
/// Integer outputs are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n); n > 0.
    std::size_t below(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via Box-Muller (no cached second draw).
    double normal();

    Rng split(std::string_view label, std::uint64_t index = 0) const {
        return Rng(derive_seed(seed_, label, index));
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

} // namespace gcnet
