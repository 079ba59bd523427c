#pragma once

#include "gcnet/dataio/dataset.hpp"

#include <cstdint>
#include <iosfwd>

namespace gcnet::data {

inline constexpr std::size_t kLatentDim = 8;

/// Knobs of the synthetic conversation benchmark.
///
/// Labels follow a sticky Markov chain, speakers alternate round-robin, and
/// each modality observes
///   class_mean[m][y] + speaker_bias * speaker_offset[m][s] + shared_weight * P_m l + noise * e
/// with one shared latent l ~ N(0, I_8) per utterance, so modalities predict
/// each other and speaker identity shifts every feature.
struct GeneratorConfig {
    std::size_t speakers = 2;
    std::size_t classes = 4;
    std::size_t dims[3] = {16, 16, 16};
    std::size_t train_conversations = 200;
    std::size_t val_conversations = 40;
    std::size_t test_conversations = 60;
    std::size_t min_length = 8;
    std::size_t max_length = 16;
    double p_stay = 0.8;
    double speaker_bias = 0.5;
    double shared_weight = 0.7;
    double noise = 1.0;
    /// Std-dev of the class-mean table entries; sets class separability.
    double class_scale = 0.5;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument naming the first offending field.
    void validate() const;
};

/// Per-dataset tables the features were drawn from.
struct GeneratorRecord {
    GeneratorConfig config;
    std::vector<Tensor> class_means;      // per modality, c x d_m
    std::vector<Tensor> speaker_offsets;  // per modality, S x d_m
    std::vector<Tensor> projections;      // per modality, d_m x 8
};

struct SyntheticSplits {
    Dataset train;
    Dataset val;
    Dataset test;
    GeneratorRecord record;
};

SyntheticSplits generate_synthetic(const GeneratorConfig& config);

void write_generator_record(const GeneratorRecord& record, std::ostream& out);

} // namespace gcnet::data
