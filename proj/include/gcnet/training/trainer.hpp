#pragma once

#include "gcnet/dataio/batch.hpp"
#include "gcnet/dataio/dataset.hpp"
#include "gcnet/dataio/missing.hpp"
#include "gcnet/model/checkpoint.hpp"
#include "gcnet/model/gcnet.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

namespace gcnet::training {

struct TrainConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-5;
    double dropout = 0.5;  // overrides the model configuration's rate
    std::size_t epochs = 100;
    std::size_t batch_size = 8;  // conversations per optimizer step
    std::uint64_t seed = 0;
    bool lower_bound = false;  // learn only from utterances with every modality present

    void validate() const;
};

/// The training split offers no utterance that can carry a loss.
class EmptyTrainingSetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double loss_total = 0.0;
    double loss_cls = 0.0;
    double loss_rec = 0.0;
    double val_waf = 0.0;
    std::optional<double> val_mse;  // mean over modalities that had missing blocks
    double realized_eta = 0.0;       // of the training masks
    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    /// epoch,loss_total,loss_cls,loss_rec,val_waf,val_mse,realized_eta
    void write_csv(std::ostream& out) const;
    friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
    model::Checkpoint best;  // parameters of the best validation-WAF epoch, earliest on ties
    std::size_t best_epoch = 0;
    ad::ParamSet final_params;
    TrainHistory history;
};

/// Losses averaged over the conversations that carried at least one loss-bearing utterance.
struct BatchLoss {
    double total = 0.0;
    double cls = 0.0;
    double rec = 0.0;
    std::size_t conversations = 0;
};

/// Loss-bearing weight per padded row: validity, and in lower-bound mode also
/// requires every modality present.
std::vector<double> loss_weights(const data::ConversationSlot& slot, bool lower_bound);

/// Forward/backward for every member of the batch. Each conversation's joint
/// loss is normalized by its own utterance count and the batch loss is the mean
/// over contributing conversations. Gradients are added into params.grad.
BatchLoss accumulate_gradients(const model::GCNetConfig& config, ad::ParamSet& params, const data::PaddedBatch& batch,
                               bool lower_bound, bool training, std::uint64_t dropout_seed);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(model::GCNetConfig config, const data::Dataset& train_set, const data::MaskSet& train_masks,
                  const data::Dataset& val_set, const data::MaskSet& val_masks, const TrainConfig& train_config,
                  const EpochCallback& on_epoch = {});

} // namespace gcnet::training
