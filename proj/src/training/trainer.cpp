#include "gcnet/training/trainer.hpp"

#include "gcnet/evaluation/evaluate.hpp"
#include "gcnet/training/adam.hpp"
#include "gcnet/training/losses.hpp"

#include <numeric>
#include <ostream>

namespace gcnet::training {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be non-negative");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
    if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
}

void TrainHistory::write_csv(std::ostream& out) const {
    out << "epoch,loss_total,loss_cls,loss_rec,val_waf,val_mse,realized_eta\n";
    for (const auto& r : epochs) {
        out << r.epoch << ',' << eval::format_number(r.loss_total) << ',' << eval::format_number(r.loss_cls) << ','
            << eval::format_number(r.loss_rec) << ',' << eval::format_number(r.val_waf) << ','
            << (r.val_mse ? eval::format_number(*r.val_mse) : "NA") << ',' << eval::format_number(r.realized_eta)
            << '\n';
    }
}

std::vector<double> loss_weights(const data::ConversationSlot& slot, bool lower_bound) {
    std::vector<double> w(slot.validity.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (slot.validity[i] == 0.0) continue;
        bool keep = true;
        if (lower_bound)
            for (const auto& bits : slot.lambda) keep = keep && bits[i] != 0;
        w[i] = keep ? 1.0 : 0.0;
    }
    return w;
}

BatchLoss accumulate_gradients(const model::GCNetConfig& config, ad::ParamSet& params, const data::PaddedBatch& batch,
                               bool lower_bound, bool training, std::uint64_t dropout_seed) {
    std::vector<data::ConversationSlot> slots;
    std::vector<std::vector<double>> weights;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto slot = data::batch_slot(batch, b);
        auto w = loss_weights(slot, lower_bound);
        if (std::accumulate(w.begin(), w.end(), 0.0) == 0.0) continue;
        slots.push_back(std::move(slot));
        weights.push_back(std::move(w));
    }
    BatchLoss out;
    out.conversations = slots.size();
    if (slots.empty()) return out;
    const double share = 1.0 / static_cast<double>(slots.size());
    for (std::size_t k = 0; k < slots.size(); ++k) {
        const auto& slot = slots[k];
        const graph::TypedGraph g = model::slot_graph(slot, config);
        Rng rng(derive_seed(dropout_seed, "conversation", k));
        ad::Tape tape;
        const model::ForwardOutput fwd = model::forward(tape, slot, g, config, params, training, rng);
        const ad::Var cls = classification_loss(fwd.logits, slot.labels, weights[k]);
        const ad::Var rec = reconstruction_loss(fwd.reconstructions, slot.features, slot.lambda, weights[k]);
        const ad::Var total = joint_loss(cls, rec, config.variant);
        tape.backward(ad::scale(total, share));
        out.total += share * total.value().item();
        out.cls += share * cls.value().item();
        out.rec += share * rec.value().item();
    }
    return out;
}

namespace {

std::optional<double> mean_mse(const std::vector<std::optional<double>>& per_modality) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : per_modality)
        if (v) {
            sum += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

void check_split(const data::Dataset& set, const data::MaskSet& masks, const model::GCNetConfig& config,
                 const char* name) {
    if (set.conversations.empty()) throw std::invalid_argument(std::string(name) + " split is empty");
    model::check_manifest(config, set.manifest);
    try {
        masks.validate(set);
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string(name) + " masks do not match the split: " + e.what());
    }
}

} // namespace

TrainResult train(model::GCNetConfig config, const data::Dataset& train_set, const data::MaskSet& train_masks,
                  const data::Dataset& val_set, const data::MaskSet& val_masks, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
    tc.validate();
    config.dropout = tc.dropout;
    config.validate();
    check_split(train_set, train_masks, config, "training");
    check_split(val_set, val_masks, config, "validation");

    bool any_loss = false;
    for (std::size_t k = 0; k < train_set.conversations.size() && !any_loss; ++k) {
        const auto& mask = train_masks.masks[k];
        for (std::size_t i = 0; i < mask.length() && !any_loss; ++i) any_loss = !tc.lower_bound || mask.complete(i);
    }
    if (!any_loss)
        throw EmptyTrainingSetError(
            "lower-bound training set is empty: no training utterance keeps all modalities at this missing rate");

    ad::ParamSet params = model::init_params(config, derive_seed(tc.seed, "init", 0));
    AdamState adam = make_adam_state(params);
    const AdamConfig adam_config{tc.learning_rate, tc.weight_decay};
    const double realized = data::realized_missing_rate(train_masks);

    TrainResult result;
    double best_waf = -1.0;
    std::vector<std::size_t> order(train_set.conversations.size());
    std::uint64_t step = 0;
    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle(derive_seed(tc.seed, "shuffle", epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double sum_total = 0.0, sum_cls = 0.0, sum_rec = 0.0;
        std::size_t contributing = 0;
        for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
            const std::size_t end = std::min(order.size(), start + tc.batch_size);
            std::vector<const data::Conversation*> convs;
            std::vector<const data::ConversationMask*> masks;
            for (std::size_t j = start; j < end; ++j) {
                convs.push_back(&train_set.conversations[order[j]]);
                masks.push_back(&train_masks.masks[order[j]]);
            }
            const data::PaddedBatch batch = data::pad_batch(convs, masks);
            params.zero_grad();
            const BatchLoss loss =
                accumulate_gradients(config, params, batch, tc.lower_bound, true, derive_seed(tc.seed, "dropout", step));
            ++step;
            if (loss.conversations == 0) continue;
            adam_step(params, adam, adam_config);
            const auto n = static_cast<double>(loss.conversations);
            sum_total += n * loss.total;
            sum_cls += n * loss.cls;
            sum_rec += n * loss.rec;
            contributing += loss.conversations;
        }

        const eval::EvalResult val = eval::evaluate(config, params, val_set, val_masks);
        EpochRecord rec;
        rec.epoch = epoch;
        const auto denom = static_cast<double>(contributing);
        rec.loss_total = sum_total / denom;
        rec.loss_cls = sum_cls / denom;
        rec.loss_rec = sum_rec / denom;
        rec.val_waf = val.classification.waf;
        rec.val_mse = mean_mse(val.imputation_mse);
        rec.realized_eta = realized;
        result.history.epochs.push_back(rec);
        if (rec.val_waf > best_waf) {
            best_waf = rec.val_waf;
            result.best_epoch = epoch;
            result.best = model::Checkpoint{config, params};
        }
        if (on_epoch) on_epoch(rec);
    }
    result.final_params = std::move(params);
    return result;
}

} // namespace gcnet::training
