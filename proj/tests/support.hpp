#pragma once

// Shared helpers for the unit tests: seeded random inputs and small datasets.

#include "gcnet/autodiff/grad_check.hpp"
#include "gcnet/autodiff/rng.hpp"
#include "gcnet/autodiff/tape.hpp"
#include "gcnet/dataio/missing.hpp"
#include "gcnet/dataio/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace gcnet::test {

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Entries bounded away from zero, so relu and friends have no kink within eps.
inline Tensor random_away_from_zero(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor t = Tensor::matrix(rows, cols);
    for (auto& v : t.data()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
    return t;
}

inline std::size_t random_extent(Rng& rng, std::size_t max = 8) { return 1 + rng.below(max); }

/// sum(x ∘ C): a scalar that weights every output entry differently.
inline ad::Var weighted_sum(ad::Var x, const Tensor& weights) {
    return ad::sum(ad::hadamard(x, x.tape().constant(weights)));
}

/// Small synthetic dataset; only the train split is populated.
inline data::Dataset small_dataset(std::uint64_t seed, std::size_t conversations, std::size_t min_len,
                                   std::size_t max_len, std::size_t speakers = 2, std::size_t classes = 3,
                                   std::size_t dim = 4) {
    data::GeneratorConfig g;
    g.speakers = speakers;
    g.classes = classes;
    g.dims[0] = g.dims[1] = g.dims[2] = dim;
    g.train_conversations = conversations;
    g.val_conversations = 0;
    g.test_conversations = 0;
    g.min_length = min_len;
    g.max_length = max_len;
    g.seed = seed;
    return data::generate_synthetic(g).train;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("gcnet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace gcnet::test
