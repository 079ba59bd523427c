#include "gcnet/model/gcnet.hpp"

#include <cmath>
#include <stdexcept>

namespace gcnet::model {

namespace {

constexpr const char* kTemporalNames[graph::kTemporalTypes] = {"past", "present", "future"};

bool has_speaker_branch(Variant v) { return v == Variant::full || v == Variant::no_tgnn || v == Variant::no_reconstruction; }
bool has_temporal_branch(Variant v) { return v == Variant::full || v == Variant::no_sgnn || v == Variant::no_reconstruction; }

std::vector<std::string> relation_param_names(const GCNetConfig& c, graph::RelationFamily family) {
    std::vector<std::string> names;
    switch (family) {
    case graph::RelationFamily::speaker:
        for (std::size_t r = 0; r < c.speakers * c.speakers; ++r)
            names.push_back("sgnn.w" + std::to_string(r / c.speakers) + "to" + std::to_string(r % c.speakers));
        break;
    case graph::RelationFamily::temporal:
        for (auto* t : kTemporalNames) names.push_back(std::string("tgnn.w_") + t);
        break;
    case graph::RelationFamily::coupled:
        for (std::size_t r = 0; r < graph::kTemporalTypes * c.speakers * c.speakers; ++r) {
            const std::size_t t = r / (c.speakers * c.speakers), s = r % (c.speakers * c.speakers);
            names.push_back(std::string("stgnn.w_") + kTemporalNames[t] + "_" + std::to_string(s / c.speakers) + "to" +
                            std::to_string(s % c.speakers));
        }
        break;
    }
    return names;
}

void add_lstm_layout(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix, std::size_t in,
                     std::size_t hidden) {
    for (const char* dir : {"fwd", "bwd"}) {
        out.emplace_back(prefix + "." + dir + ".w_ih", Shape{in, 4 * hidden});
        out.emplace_back(prefix + "." + dir + ".w_hh", Shape{hidden, 4 * hidden});
        out.emplace_back(prefix + "." + dir + ".bias", Shape{1, 4 * hidden});
    }
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<ad::Var> bind_relation_weights(ad::Tape& tape, ad::ParamSet& params, const GCNetConfig& c,
                                           graph::RelationFamily family) {
    std::vector<ad::Var> out;
    for (const auto& name : relation_param_names(c, family)) out.push_back(tape.param(params.at(name)));
    return out;
}

} // namespace

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::full: return "full";
    case Variant::no_sgnn: return "no_sgnn";
    case Variant::no_tgnn: return "no_tgnn";
    case Variant::coupled: return "coupled";
    case Variant::no_reconstruction: return "no_reconstruction";
    }
    return "unknown";
}

Variant parse_variant(std::string_view text) {
    std::string s(text);
    for (auto& ch : s)
        if (ch == '-') ch = '_';
    if (s == "full") return Variant::full;
    if (s == "no_sgnn") return Variant::no_sgnn;
    if (s == "no_tgnn") return Variant::no_tgnn;
    if (s == "coupled") return Variant::coupled;
    if (s == "no_reconstruction" || s == "no_rec") return Variant::no_reconstruction;
    throw std::invalid_argument("unknown variant '" + std::string(text) + "'");
}

void GCNetConfig::validate() const {
    if (latent < 4 || latent % 2 != 0)
        throw std::invalid_argument("model config: latent dim D must be even and >= 4, got " + std::to_string(latent));
    if (window < 1) throw std::invalid_argument("model config: window must be >= 1");
    if (modality_dims.empty() || modality_dims.size() > data::kMaxModalities)
        throw std::invalid_argument("model config: 1..3 modalities required");
    for (auto d : modality_dims)
        if (d == 0) throw std::invalid_argument("model config: modality dims must be positive");
    if (classes < 1) throw std::invalid_argument("model config: classes must be >= 1");
    if (speakers < 1) throw std::invalid_argument("model config: speakers must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model config: dropout must be in [0, 1)");
}

std::size_t GCNetConfig::input_width() const {
    std::size_t w = 0;
    for (auto d : modality_dims) w += d;
    return w;
}

GCNetConfig make_config(const data::Manifest& manifest, std::size_t latent, std::size_t window, double dropout,
                        Variant variant) {
    GCNetConfig c{latent, window, manifest.dims, manifest.classes, manifest.speakers, dropout, variant};
    c.validate();
    return c;
}

void check_manifest(const GCNetConfig& config, const data::Manifest& manifest) {
    if (config.modality_dims != manifest.dims)
        throw std::invalid_argument("dataset has " + std::to_string(manifest.modalities()) +
                                    " modalities with different widths than the model expects");
    if (config.classes != manifest.classes)
        throw std::invalid_argument("dataset has " + std::to_string(manifest.classes) + " classes, model expects " +
                                    std::to_string(config.classes));
    if (config.speakers != manifest.speakers)
        throw std::invalid_argument("dataset has " + std::to_string(manifest.speakers) + " speakers, model expects " +
                                    std::to_string(config.speakers));
}

std::vector<std::pair<std::string, Shape>> param_layout(const GCNetConfig& c) {
    c.validate();
    const std::size_t d = c.latent, half = c.latent / 2;
    std::vector<std::pair<std::string, Shape>> out;
    add_lstm_layout(out, "encoder", c.input_width(), half);
    auto add_family = [&](graph::RelationFamily f) {
        for (auto& name : relation_param_names(c, f)) out.emplace_back(std::move(name), Shape{d, d});
    };
    if (has_speaker_branch(c.variant)) add_family(graph::RelationFamily::speaker);
    if (has_temporal_branch(c.variant)) add_family(graph::RelationFamily::temporal);
    if (c.variant == Variant::coupled) add_family(graph::RelationFamily::coupled);
    add_lstm_layout(out, "fusion", 3 * d, half);
    out.emplace_back("classifier.w", Shape{d, c.classes});
    out.emplace_back("classifier.b", Shape{1, c.classes});
    for (std::size_t m = 0; m < c.modalities(); ++m) {
        const std::string key(data::modality_name(m));
        out.emplace_back("reconstruct." + key + ".w", Shape{d, c.modality_dims[m]});
        out.emplace_back("reconstruct." + key + ".b", Shape{1, c.modality_dims[m]});
    }
    return out;
}

ad::ParamSet init_params(const GCNetConfig& config, std::uint64_t seed) {
    ad::ParamSet params;
    for (const auto& [name, shape] : param_layout(config)) {
        Tensor value(shape);
        const bool is_bias = ends_with(name, ".bias") || ends_with(name, ".b");
        if (is_bias) {
            if (ends_with(name, ".bias")) {  // LSTM: [input, forget, cell, output]
                const std::size_t hidden = shape[1] / 4;
                for (std::size_t k = hidden; k < 2 * hidden; ++k) value[k] = 1.0;
            }
        } else {
            const double bound = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
            Rng rng(derive_seed(seed, name));
            for (auto& v : value.data()) v = rng.uniform(-bound, bound);
        }
        params.add(name, std::move(value));
    }
    return params;
}

BiLstmWeights bind_bilstm(ad::Tape& tape, ad::ParamSet& params, std::string_view prefix) {
    const std::string p(prefix);
    auto dir = [&](const char* d) {
        return LstmWeights{tape.param(params.at(p + "." + d + ".w_ih")), tape.param(params.at(p + "." + d + ".w_hh")),
                           tape.param(params.at(p + "." + d + ".bias"))};
    };
    BiLstmWeights w;
    w.forward = dir("fwd");
    w.backward = dir("bwd");
    return w;
}

ad::Var bilstm(ad::Var x, const BiLstmWeights& weights) {
    const ad::Var fwd = ad::lstm(x, weights.forward.w_ih, weights.forward.w_hh, weights.forward.bias, false);
    const ad::Var bwd = ad::lstm(x, weights.backward.w_ih, weights.backward.w_hh, weights.backward.bias, true);
    const ad::Var parts[] = {fwd, bwd};
    return ad::concat_cols(parts);
}

ad::Var rgcn_forward(ad::Var h, const graph::TypedGraph& graph, graph::RelationFamily family,
                     std::span<const ad::Var> weights) {
    const std::size_t n = h.value().rows();
    if (graph.length != n)
        throw DimensionError("rgcn_forward: graph has " + std::to_string(graph.length) + " nodes, H has " +
                             std::to_string(n) + " rows");
    const std::size_t relations = graph.relation_count(family);
    if (weights.size() != relations)
        throw std::invalid_argument("rgcn_forward: " + std::to_string(weights.size()) + " weight matrices for " +
                                    std::to_string(relations) + " relations");
    ad::Tape& tape = h.tape();
    const auto hoods = graph.neighborhoods(family);
    ad::Var total;
    for (std::size_t r = 0; r < relations; ++r) {
        Tensor mean_op = Tensor::matrix(n, n);
        bool used = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& sources = hoods[i][r];
            if (sources.empty()) continue;
            used = true;
            const double w = 1.0 / static_cast<double>(sources.size());
            for (auto j : sources) mean_op(i, j) += w;
        }
        if (!used) continue;
        const ad::Var term = ad::matmul(ad::matmul(tape.constant(std::move(mean_op)), h), weights[r]);
        total = total.valid() ? ad::add(total, term) : term;
    }
    if (!total.valid()) throw std::logic_error("rgcn_forward: graph has no edges");
    return ad::relu(total);
}

Tensor masked_input(const data::ConversationSlot& slot) {
    std::size_t width = 0;
    for (const auto& f : slot.features) width += f.cols();
    Tensor out = Tensor::matrix(slot.length, width);
    std::size_t offset = 0;
    for (std::size_t m = 0; m < slot.features.size(); ++m) {
        const Tensor& f = slot.features[m];
        for (std::size_t i = 0; i < slot.length; ++i) {
            if (!slot.lambda[m][i]) continue;
            auto src = f.row(i);
            std::copy(src.begin(), src.end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
        }
        offset += f.cols();
    }
    return out;
}

graph::TypedGraph slot_graph(const data::ConversationSlot& slot, const GCNetConfig& config) {
    return graph::build_graph(std::span<const int>(slot.speakers.data(), slot.length), config.window, config.speakers);
}

ForwardOutput forward(ad::Tape& tape, const data::ConversationSlot& slot, const graph::TypedGraph& graph,
                      const GCNetConfig& config, ad::ParamSet& params, bool training, Rng& rng) {
    const std::size_t n = slot.length;
    if (n == 0 || n > slot.padded_length) throw std::invalid_argument("forward: slot has no valid utterances");
    for (std::size_t i = 0; i < slot.padded_length; ++i)
        if ((slot.validity[i] != 0.0) != (i < n))
            throw std::invalid_argument("forward: validity bits of '" + slot.id + "' are not a prefix of ones");
    if (slot.features.size() != config.modalities())
        throw DimensionError("forward: slot has " + std::to_string(slot.features.size()) + " modalities, model " +
                             std::to_string(config.modalities()));
    for (std::size_t m = 0; m < config.modalities(); ++m)
        if (slot.features[m].cols() != config.modality_dims[m])
            throw DimensionError("forward: modality '" + std::string(data::modality_name(m)) + "' width " +
                                 std::to_string(slot.features[m].cols()) + ", model expects " +
                                 std::to_string(config.modality_dims[m]));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t kept = 0;
        for (const auto& bits : slot.lambda) kept += bits[i] != 0;
        if (kept == 0)
            throw std::invalid_argument("forward: utterance " + std::to_string(i) + " of '" + slot.id +
                                        "' has no available modality");
    }
    if (graph.length != n) throw DimensionError("forward: graph length does not match the conversation");

    const std::size_t d = config.latent;
    const ad::Var input = tape.constant(masked_input(slot));
    ad::Var h = bilstm(input, bind_bilstm(tape, params, "encoder"));
    h = ad::dropout(h, config.dropout, training, rng);

    ad::Var z, g;
    if (config.variant == Variant::coupled) {
        z = rgcn_forward(h, graph, graph::RelationFamily::coupled,
                         bind_relation_weights(tape, params, config, graph::RelationFamily::coupled));
    } else if (has_speaker_branch(config.variant)) {
        z = rgcn_forward(h, graph, graph::RelationFamily::speaker,
                         bind_relation_weights(tape, params, config, graph::RelationFamily::speaker));
    } else {
        z = tape.constant(Tensor::matrix(n, d));
    }
    if (has_temporal_branch(config.variant)) {
        g = rgcn_forward(h, graph, graph::RelationFamily::temporal,
                         bind_relation_weights(tape, params, config, graph::RelationFamily::temporal));
    } else {
        g = tape.constant(Tensor::matrix(n, d));
    }

    const ad::Var fused_in[] = {h, z, g};
    ad::Var q = bilstm(ad::concat_cols(fused_in), bind_bilstm(tape, params, "fusion"));
    q = ad::dropout(q, config.dropout, training, rng);

    const ad::Var logits =
        ad::add_row_bias(ad::matmul(q, tape.param(params.at("classifier.w"))), tape.param(params.at("classifier.b")));
    const ad::Var probs = ad::softmax_rows(logits);

    const std::size_t lp = slot.padded_length;
    ForwardOutput out;
    out.h = ad::pad_rows(h, lp);
    out.z = ad::pad_rows(z, lp);
    out.g = ad::pad_rows(g, lp);
    out.q = ad::pad_rows(q, lp);
    out.logits = ad::pad_rows(logits, lp);
    out.probs = ad::pad_rows(probs, lp);
    for (std::size_t m = 0; m < config.modalities(); ++m) {
        const std::string key(data::modality_name(m));
        const ad::Var rec = ad::add_row_bias(ad::matmul(q, tape.param(params.at("reconstruct." + key + ".w"))),
                                             tape.param(params.at("reconstruct." + key + ".b")));
        out.reconstructions.push_back(ad::pad_rows(rec, lp));
    }
    return out;
}

ForwardOutput forward(ad::Tape& tape, const data::Conversation& conversation, const data::ConversationMask& mask,
                      const graph::TypedGraph& graph, const GCNetConfig& config, ad::ParamSet& params, bool training,
                      Rng& rng) {
    return forward(tape, data::make_slot(conversation, mask), graph, config, params, training, rng);
}

} // namespace gcnet::model
