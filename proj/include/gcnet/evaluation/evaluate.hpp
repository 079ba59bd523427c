#pragma once

#include "gcnet/dataio/dataset.hpp"
#include "gcnet/dataio/missing.hpp"
#include "gcnet/evaluation/metrics.hpp"
#include "gcnet/model/gcnet.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gcnet::eval {

struct ConversationResult {
    std::string id;
    std::vector<int> labels;
    std::vector<int> predictions;
    Tensor probs;                        // L x c
    Tensor embeddings;                   // L x D fused states
    std::vector<Tensor> reconstructions;  // per modality, L x d_m
};

struct EvalResult {
    ClassificationMetrics classification;
    std::vector<std::optional<double>> imputation_mse;  // per modality; nullopt when nothing was missing
    std::vector<ConversationResult> conversations;
};

/// Inference with dropout off. Throws std::invalid_argument when the dataset
/// manifest, the masks and the configuration disagree.
EvalResult evaluate(const model::GCNetConfig& config, const ad::ParamSet& params, const data::Dataset& dataset,
                    const data::MaskSet& masks);

/// Baseline that fills every missing block with the per-modality mean of the
/// observed training rows. Fitting throws if a modality was never observed.
class MeanImputer {
public:
    static MeanImputer fit(const data::Dataset& train, const data::MaskSet& masks);

    const std::vector<std::vector<double>>& means() const { return means_; }
    std::vector<std::optional<double>> mse(const data::Dataset& dataset, const data::MaskSet& masks) const;

private:
    std::vector<std::vector<double>> means_;
};

/// Copy of the dataset with missing blocks replaced by the model's reconstructions.
data::Dataset impute_dataset(const EvalResult& result, const data::Dataset& dataset, const data::MaskSet& masks);

/// Shortest round-trip decimal text.
std::string format_number(double value);

/// conversation,index,label,predicted,p_0..p_{c-1}
void write_predictions_csv(const EvalResult& result, std::ostream& out);

/// conversation,index,label,q_0..q_{D-1}
void write_embeddings_csv(const EvalResult& result, std::ostream& out);

struct MetricsRow {
    std::string run_id;
    std::string variant;
    std::optional<std::uint64_t> seed;  // empty on aggregate rows
    double eta = 0.0;
    ClassificationMetrics classification;
    std::vector<std::optional<double>> imputation_mse;
    std::vector<std::optional<double>> baseline_mse;  // mean imputation, per modality
    std::string error;                                 // non-empty when the run failed
};

/// run_id,seed,eta,variant,waf,accuracy,f1_*,mse_*,mean_mse_*,error.
/// Missing values are written as NA; the mse_* (mean_mse_*) block is left out
/// when no row has any applicable value.
void write_metrics_csv(std::span<const MetricsRow> rows, std::size_t classes, std::size_t modalities,
                       std::ostream& out);

} // namespace gcnet::eval
