#include "gcnet/evaluation/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace gcnet::eval {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
    if (classes == 0) throw std::invalid_argument("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::add(int label, int prediction) {
    const auto c = static_cast<int>(classes_);
    if (label < 0 || label >= c) throw std::invalid_argument("label " + std::to_string(label) + " outside [0, " + std::to_string(c) + ")");
    if (prediction < 0 || prediction >= c)
        throw std::invalid_argument("prediction " + std::to_string(prediction) + " outside [0, " + std::to_string(c) + ")");
    ++counts_[static_cast<std::size_t>(label) * classes_ + static_cast<std::size_t>(prediction)];
    ++total_;
}

std::size_t ConfusionMatrix::support(std::size_t label) const {
    std::size_t n = 0;
    for (std::size_t p = 0; p < classes_; ++p) n += count(label, p);
    return n;
}

std::size_t ConfusionMatrix::predicted(std::size_t prediction) const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < classes_; ++l) n += count(l, prediction);
    return n;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& confusion) {
    if (confusion.total() == 0) throw std::invalid_argument("classification metrics of an empty set");
    const std::size_t c = confusion.classes();
    ClassificationMetrics out;
    out.count = confusion.total();
    out.f1.assign(c, 0.0);
    out.support.assign(c, 0);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < c; ++k) {
        const std::size_t tp = confusion.count(k, k);
        const std::size_t support = confusion.support(k);
        const std::size_t fn = support - tp;
        const std::size_t fp = confusion.predicted(k) - tp;
        const std::size_t denom = 2 * tp + fp + fn;
        out.f1[k] = denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
        out.support[k] = support;
        correct += tp;
    }
    const auto n = static_cast<double>(out.count);
    for (std::size_t k = 0; k < c; ++k) out.waf += static_cast<double>(out.support[k]) * out.f1[k];
    out.waf /= n;
    out.accuracy = static_cast<double>(correct) / n;
    return out;
}

ClassificationMetrics weighted_f1(std::span<const int> labels, std::span<const int> predictions,
                                  std::size_t classes) {
    if (labels.size() != predictions.size())
        throw std::invalid_argument("weighted_f1: " + std::to_string(labels.size()) + " labels vs " +
                                    std::to_string(predictions.size()) + " predictions");
    if (labels.empty()) throw std::invalid_argument("weighted_f1: empty input");
    ConfusionMatrix confusion(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) confusion.add(labels[i], predictions[i]);
    return classification_metrics(confusion);
}

ClassificationMetrics weighted_f1(std::span<const int> labels, std::span<const int> predictions) {
    int top = 0;
    for (int v : labels) top = std::max(top, v);
    for (int v : predictions) top = std::max(top, v);
    return weighted_f1(labels, predictions, static_cast<std::size_t>(top) + 1);
}

int argmax(std::span<const double> row) {
    if (row.empty()) throw std::invalid_argument("argmax of an empty row");
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return static_cast<int>(best);
}

ImputationError::ImputationError(std::size_t modalities) : sums_(modalities, 0.0), counts_(modalities, 0) {}

void ImputationError::add(std::size_t m, const Tensor& reconstruction, const Tensor& target,
                          std::span<const std::uint8_t> lambda, std::span<const double> validity) {
    if (m >= sums_.size()) throw std::out_of_range("ImputationError: modality index out of range");
    if (!reconstruction.same_shape(target))
        throw DimensionError("ImputationError: reconstruction " + shape_to_string(reconstruction.shape()) +
                             " vs target " + shape_to_string(target.shape()));
    if (lambda.size() > target.rows() || validity.size() != lambda.size())
        throw DimensionError("ImputationError: mask length does not fit the target");
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        if (validity[i] == 0.0 || lambda[i]) continue;
        const auto r = reconstruction.row(i);
        const auto t = target.row(i);
        for (std::size_t k = 0; k < r.size(); ++k) sums_[m] += (r[k] - t[k]) * (r[k] - t[k]);
        counts_[m] += r.size();
    }
}

std::optional<double> ImputationError::mse(std::size_t m) const {
    if (counts_.at(m) == 0) return std::nullopt;
    return sums_[m] / static_cast<double>(counts_[m]);
}

std::vector<std::optional<double>> ImputationError::mse() const {
    std::vector<std::optional<double>> out;
    for (std::size_t m = 0; m < sums_.size(); ++m) out.push_back(mse(m));
    return out;
}

} // namespace gcnet::eval
