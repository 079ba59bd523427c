#pragma once

#include "gcnet/autodiff/tape.hpp"
#include "gcnet/convgraph/graph.hpp"
#include "gcnet/dataio/batch.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gcnet::model {

/// Architecture variants used in the ablations.
///  - full: speaker and temporal aggregators.
///  - no_sgnn: speaker branch replaced by zeros (temporal only).
///  - no_tgnn: temporal branch replaced by zeros (speaker only).
///  - coupled: one aggregator over 3*S^2 speaker-temporal relations, placed in
///    the speaker slot; temporal slot zero.
///  - no_reconstruction: full network, reconstruction excluded from the loss.
enum class Variant { full, no_sgnn, no_tgnn, coupled, no_reconstruction };

std::string_view to_string(Variant v);
/// Accepts both `no_sgnn` and `no-sgnn` spellings, plus `no-rec`.
Variant parse_variant(std::string_view text);

struct GCNetConfig {
    std::size_t latent = 50;  // D: Bi-LSTM output width and graph output width
    std::size_t window = 2;
    std::vector<std::size_t> modality_dims;
    std::size_t classes = 0;
    std::size_t speakers = 0;
    double dropout = 0.5;
    Variant variant = Variant::full;

    void validate() const;
    std::size_t input_width() const;
    std::size_t modalities() const { return modality_dims.size(); }
    friend bool operator==(const GCNetConfig&, const GCNetConfig&) = default;
};

GCNetConfig make_config(const data::Manifest& manifest, std::size_t latent, std::size_t window, double dropout,
                        Variant variant);

/// Throws std::invalid_argument unless the manifest's dims, classes and
/// speaker count equal the configuration's.
void check_manifest(const GCNetConfig& config, const data::Manifest& manifest);

/// Expected parameter names and shapes, in creation order.
std::vector<std::pair<std::string, Shape>> param_layout(const GCNetConfig& config);

/// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1. Every
/// parameter draws from its own stream keyed by name, so variants that share
/// a parameter initialize it identically.
ad::ParamSet init_params(const GCNetConfig& config, std::uint64_t seed);

struct LstmWeights {
    ad::Var w_ih;
    ad::Var w_hh;
    ad::Var bias;
};

struct BiLstmWeights {
    LstmWeights forward;
    LstmWeights backward;
};

BiLstmWeights bind_bilstm(ad::Tape& tape, ad::ParamSet& params, std::string_view prefix);

/// Forward-direction states followed by backward-direction states (L x 2H).
ad::Var bilstm(ad::Var x, const BiLstmWeights& weights);

/// z_i = relu( sum_r W_r . mean_{j in N_i^r} h_j ); empty relations contribute nothing.
/// Weights are right-multiplied: (mean of h rows) * W_r.
ad::Var rgcn_forward(ad::Var h, const graph::TypedGraph& graph, graph::RelationFamily family,
                     std::span<const ad::Var> weights);

/// Input block F: per-modality features scaled by availability bits, valid rows only.
Tensor masked_input(const data::ConversationSlot& slot);

graph::TypedGraph slot_graph(const data::ConversationSlot& slot, const GCNetConfig& config);

/// All outputs are padded to the slot's padded length with zero rows.
struct ForwardOutput {
    ad::Var h;       // L x D initial node states
    ad::Var z;       // L x D speaker-branch output
    ad::Var g;       // L x D temporal-branch output
    ad::Var q;       // L x D fused states
    ad::Var logits;  // L x c
    ad::Var probs;   // L x c
    std::vector<ad::Var> reconstructions;  // per modality, L x d_m
};

ForwardOutput forward(ad::Tape& tape, const data::ConversationSlot& slot, const graph::TypedGraph& graph,
                      const GCNetConfig& config, ad::ParamSet& params, bool training, Rng& rng);

ForwardOutput forward(ad::Tape& tape, const data::Conversation& conversation, const data::ConversationMask& mask,
                      const graph::TypedGraph& graph, const GCNetConfig& config, ad::ParamSet& params, bool training,
                      Rng& rng);

} // namespace gcnet::model
