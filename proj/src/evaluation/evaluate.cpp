#include "gcnet/evaluation/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <stdexcept>

namespace gcnet::eval {

namespace {

Tensor leading_rows(const Tensor& t, std::size_t rows) {
    if (t.rows() == rows) return t;
    Tensor out = Tensor::matrix(rows, t.cols());
    for (std::size_t i = 0; i < rows; ++i) {
        const auto src = t.row(i);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char ch : text) {
        if (ch == '"') out += '"';
        out += ch == '\n' ? ' ' : ch;
    }
    return out + '"';
}

} // namespace

EvalResult evaluate(const model::GCNetConfig& config, const ad::ParamSet& params, const data::Dataset& dataset,
                    const data::MaskSet& masks) {
    model::check_manifest(config, dataset.manifest);
    masks.validate(dataset);
    if (dataset.conversations.empty()) throw std::invalid_argument("evaluate: empty dataset");
    ad::ParamSet local = params;
    Rng unused(0);
    ConfusionMatrix confusion(config.classes);
    ImputationError imputation(config.modalities());
    EvalResult result;
    result.conversations.reserve(dataset.conversations.size());
    for (std::size_t k = 0; k < dataset.conversations.size(); ++k) {
        const data::Conversation& conv = dataset.conversations[k];
        const data::ConversationSlot slot = data::make_slot(conv, masks.masks[k]);
        const graph::TypedGraph g = model::slot_graph(slot, config);
        ad::Tape tape;
        const model::ForwardOutput out = model::forward(tape, slot, g, config, local, false, unused);
        const std::size_t n = conv.length();
        ConversationResult r;
        r.id = conv.id;
        r.labels = conv.labels;
        r.probs = leading_rows(out.probs.value(), n);
        r.embeddings = leading_rows(out.q.value(), n);
        for (std::size_t i = 0; i < n; ++i) {
            const int pred = argmax(r.probs.row(i));
            r.predictions.push_back(pred);
            confusion.add(conv.labels[i], pred);
        }
        const std::vector<double> validity(n, 1.0);
        for (std::size_t m = 0; m < config.modalities(); ++m) {
            r.reconstructions.push_back(leading_rows(out.reconstructions[m].value(), n));
            imputation.add(m, r.reconstructions.back(), conv.features[m], masks.masks[k].bits[m], validity);
        }
        result.conversations.push_back(std::move(r));
    }
    result.classification = classification_metrics(confusion);
    result.imputation_mse = imputation.mse();
    return result;
}

MeanImputer MeanImputer::fit(const data::Dataset& train, const data::MaskSet& masks) {
    masks.validate(train);
    const std::size_t mods = train.manifest.modalities();
    MeanImputer imp;
    for (std::size_t m = 0; m < mods; ++m) {
        std::vector<double> sum(train.manifest.dims[m], 0.0);
        std::size_t rows = 0;
        for (std::size_t k = 0; k < train.conversations.size(); ++k) {
            const auto& conv = train.conversations[k];
            for (std::size_t i = 0; i < conv.length(); ++i) {
                if (!masks.masks[k].available(i, m)) continue;
                const auto r = conv.features[m].row(i);
                for (std::size_t j = 0; j < r.size(); ++j) sum[j] += r[j];
                ++rows;
            }
        }
        if (rows == 0)
            throw std::invalid_argument("mean imputation: modality '" + std::string(data::modality_name(m)) +
                                        "' has no observed training rows");
        for (double& v : sum) v /= static_cast<double>(rows);
        imp.means_.push_back(std::move(sum));
    }
    return imp;
}

std::vector<std::optional<double>> MeanImputer::mse(const data::Dataset& dataset, const data::MaskSet& masks) const {
    masks.validate(dataset);
    if (dataset.manifest.modalities() != means_.size())
        throw std::invalid_argument("MeanImputer: modality count differs from the fitted data");
    ImputationError err(means_.size());
    for (std::size_t k = 0; k < dataset.conversations.size(); ++k) {
        const auto& conv = dataset.conversations[k];
        const std::vector<double> validity(conv.length(), 1.0);
        for (std::size_t m = 0; m < means_.size(); ++m) {
            if (means_[m].size() != conv.features[m].cols())
                throw DimensionError("MeanImputer: feature width differs from the fitted data");
            Tensor filled = Tensor::matrix(conv.length(), means_[m].size());
            for (std::size_t i = 0; i < conv.length(); ++i)
                std::copy(means_[m].begin(), means_[m].end(), filled.row(i).begin());
            err.add(m, filled, conv.features[m], masks.masks[k].bits[m], validity);
        }
    }
    return err.mse();
}

data::Dataset impute_dataset(const EvalResult& result, const data::Dataset& dataset, const data::MaskSet& masks) {
    masks.validate(dataset);
    if (result.conversations.size() != dataset.conversations.size())
        throw std::invalid_argument("impute_dataset: result covers a different number of conversations");
    data::Dataset out = dataset;
    for (std::size_t k = 0; k < out.conversations.size(); ++k) {
        auto& conv = out.conversations[k];
        const auto& r = result.conversations[k];
        if (r.id != conv.id) throw std::invalid_argument("impute_dataset: conversation '" + conv.id + "' out of order");
        for (std::size_t m = 0; m < conv.features.size(); ++m)
            for (std::size_t i = 0; i < conv.length(); ++i) {
                if (masks.masks[k].available(i, m)) continue;
                const auto src = r.reconstructions[m].row(i);
                std::copy(src.begin(), src.end(), conv.features[m].row(i).begin());
            }
    }
    return out;
}

std::string format_number(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void write_predictions_csv(const EvalResult& result, std::ostream& out) {
    if (result.conversations.empty()) return;
    const std::size_t c = result.conversations.front().probs.cols();
    out << "conversation,index,label,predicted";
    for (std::size_t k = 0; k < c; ++k) out << ",p_" << k;
    out << '\n';
    for (const auto& r : result.conversations)
        for (std::size_t i = 0; i < r.labels.size(); ++i) {
            out << csv_field(r.id) << ',' << i << ',' << r.labels[i] << ',' << r.predictions[i];
            for (double p : r.probs.row(i)) out << ',' << format_number(p);
            out << '\n';
        }
}

void write_embeddings_csv(const EvalResult& result, std::ostream& out) {
    if (result.conversations.empty()) return;
    const std::size_t d = result.conversations.front().embeddings.cols();
    out << "conversation,index,label";
    for (std::size_t k = 0; k < d; ++k) out << ",q_" << k;
    out << '\n';
    for (const auto& r : result.conversations)
        for (std::size_t i = 0; i < r.labels.size(); ++i) {
            out << csv_field(r.id) << ',' << i << ',' << r.labels[i];
            for (double v : r.embeddings.row(i)) out << ',' << format_number(v);
            out << '\n';
        }
}

void write_metrics_csv(std::span<const MetricsRow> rows, std::size_t classes, std::size_t modalities,
                       std::ostream& out) {
    auto any_value = [&](auto member) {
        for (const auto& row : rows)
            for (const auto& v : row.*member)
                if (v) return true;
        return false;
    };
    const bool with_mse = any_value(&MetricsRow::imputation_mse);
    const bool with_baseline = any_value(&MetricsRow::baseline_mse);
    auto optional_cells = [&](const std::vector<std::optional<double>>& values) {
        for (std::size_t m = 0; m < modalities; ++m) out << ',' << (m < values.size() ? optional_number(values[m]) : "NA");
    };

    out << "run_id,seed,eta,variant,waf,accuracy";
    for (std::size_t k = 0; k < classes; ++k) out << ",f1_" << k;
    if (with_mse)
        for (std::size_t m = 0; m < modalities; ++m) out << ",mse_" << data::modality_name(m);
    if (with_baseline)
        for (std::size_t m = 0; m < modalities; ++m) out << ",mean_mse_" << data::modality_name(m);
    out << ",error\n";
    for (const auto& row : rows) {
        out << csv_field(row.run_id) << ',' << (row.seed ? std::to_string(*row.seed) : "NA") << ',' << format_number(row.eta) << ',' << row.variant;
        const bool ok = row.error.empty();
        out << ',' << (ok ? format_number(row.classification.waf) : "NA");
        out << ',' << (ok ? format_number(row.classification.accuracy) : "NA");
        for (std::size_t k = 0; k < classes; ++k)
            out << ',' << (ok && k < row.classification.f1.size() ? format_number(row.classification.f1[k]) : "NA");
        if (with_mse) optional_cells(row.imputation_mse);
        if (with_baseline) optional_cells(row.baseline_mse);
        out << ',' << csv_field(row.error) << '\n';
    }
}

} // namespace gcnet::eval
