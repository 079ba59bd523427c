#pragma once

#include "gcnet/dataio/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gcnet::data {

/// Availability bits λ for one conversation, indexed [modality][utterance].
struct ConversationMask {
    std::string id;
    double requested_rate = 0.0;
    std::vector<std::vector<std::uint8_t>> bits;

    std::size_t modalities() const { return bits.size(); }
    std::size_t length() const { return bits.empty() ? 0 : bits.front().size(); }
    bool available(std::size_t utterance, std::size_t modality) const { return bits[modality][utterance] != 0; }
    std::size_t available_count(std::size_t utterance) const;
    bool complete(std::size_t utterance) const { return available_count(utterance) == modalities(); }
    /// Missing-pattern id: bit (M-1-m) holds λ^m, so for M=3 the id reads (λ^a λ^l λ^v).
    unsigned pattern(std::size_t utterance) const;

    /// Throws ValidationError unless every utterance keeps at least one modality
    /// and the shape matches `conv`.
    void validate(const Conversation& conv) const;
    friend bool operator==(const ConversationMask&, const ConversationMask&) = default;
};

struct MaskSet {
    std::size_t modalities = 0;
    double requested_rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<ConversationMask> masks;

    void validate(const Dataset& dataset) const;
    friend bool operator==(const MaskSet&, const MaskSet&) = default;
};

/// Mask with every modality available.
ConversationMask full_mask(const Conversation& conv);
MaskSet full_masks(const Dataset& dataset);

/// Largest accepted rate for M modalities: (M-1)/M, or 0.7 for M=3.
double max_missing_rate(std::size_t modalities);

/// Per-slot drop probability q whose expected realized rate, after restoring
/// one uniformly chosen modality for utterances that lost all of them, equals
/// eta: solves M*q - q^M = M*eta. Saturates at 1 when eta >= (M-1)/M.
double slot_drop_probability(double eta, std::size_t modalities);

/// Samples availability masks: every utterance-modality slot is dropped
/// independently with probability slot_drop_probability(eta, M); an utterance
/// left with no modality gets one back, chosen uniformly. Pure in
/// (dataset shape, eta, seed). Features are untouched.
MaskSet apply_missing(const Dataset& dataset, double eta, std::uint64_t seed);

/// 1 - (sum of available slots) / (N * M) over every utterance in the set.
double realized_missing_rate(std::span<const ConversationMask> masks);
double realized_missing_rate(const MaskSet& masks);

// JSON-lines, paired line by line with the dataset file. Line 1
//   {"M":3,"requested_rate":0.3,"seed":7}
// then per conversation
//   {"id":"...","requested_rate":0.3,"lambda":{"a":[1,0,...],"l":[...],"v":[...]}}
MaskSet read_masks(std::istream& in);
void write_masks(const MaskSet& masks, std::ostream& out);
MaskSet load_masks(const std::filesystem::path& path);
void save_masks(const MaskSet& masks, const std::filesystem::path& path);

} // namespace gcnet::data
