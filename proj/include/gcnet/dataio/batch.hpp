#pragma once

#include "gcnet/dataio/missing.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gcnet::data {

/// Conversations zero-padded to a common length, with per-slot validity bits.
struct PaddedBatch {
    std::size_t max_length = 0;
    std::vector<std::string> ids;
    std::vector<std::size_t> lengths;
    std::vector<Tensor> features;  // per modality, B x Lmax x d_m; padding rows are zero
    Tensor lambda;                 // B x Lmax x M availability; zero on padding
    Tensor validity;               // B x Lmax; 1 for real utterances, 0 for padding
    std::vector<int> labels;       // B * Lmax, row-major; 0 on padding
    std::vector<int> speakers;     // B * Lmax, row-major; 0 on padding

    std::size_t size() const { return ids.size(); }
    std::size_t valid_count() const;
};

/// Pads to max(longest conversation, min_length) rows.
PaddedBatch pad_batch(std::span<const Conversation* const> conversations,
                      std::span<const ConversationMask* const> masks, std::size_t min_length = 0);
PaddedBatch pad_batch(std::span<const Conversation> conversations, std::span<const ConversationMask> masks,
                      std::size_t min_length = 0);

/// One conversation in model-input form: `padded_length` rows of which the
/// first `length` are real utterances.
struct ConversationSlot {
    std::string id;
    std::size_t length = 0;
    std::size_t padded_length = 0;
    std::vector<Tensor> features;                 // per modality, padded_length x d_m
    std::vector<std::vector<std::uint8_t>> lambda;  // [m][i]
    std::vector<double> validity;
    std::vector<int> labels;
    std::vector<int> speakers;
};

ConversationSlot batch_slot(const PaddedBatch& batch, std::size_t b);
ConversationSlot make_slot(const Conversation& conversation, const ConversationMask& mask);

} // namespace gcnet::data
