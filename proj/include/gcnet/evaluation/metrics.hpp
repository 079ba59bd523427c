#pragma once

#include "gcnet/autodiff/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace gcnet::eval {

/// counts[label][prediction].
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes);

    void add(int label, int prediction);
    std::size_t classes() const { return classes_; }
    std::size_t count(std::size_t label, std::size_t prediction) const { return counts_[label * classes_ + prediction]; }
    std::size_t total() const { return total_; }
    std::size_t support(std::size_t label) const;
    std::size_t predicted(std::size_t prediction) const;

private:
    std::size_t classes_;
    std::size_t total_ = 0;
    std::vector<std::size_t> counts_;
};

struct ClassificationMetrics {
    double waf = 0.0;       // support-weighted mean of per-class F1
    double accuracy = 0.0;
    std::vector<double> f1;  // 0 for classes with no true and no predicted instances
    std::vector<std::size_t> support;
    std::size_t count = 0;
};

/// Per-class F1 = 2*tp / (2*tp + fp + fn), 0 when the denominator is 0.
ClassificationMetrics classification_metrics(const ConfusionMatrix& confusion);

/// Throws std::invalid_argument on empty input, length mismatch or labels
/// outside [0, classes).
ClassificationMetrics weighted_f1(std::span<const int> labels, std::span<const int> predictions,
                                  std::size_t classes);

/// Classes inferred as 1 + the largest label or prediction.
ClassificationMetrics weighted_f1(std::span<const int> labels, std::span<const int> predictions);

/// Index of the row maximum; ties go to the lowest index.
int argmax(std::span<const double> row);

/// Squared error summed over missing, valid positions, per modality.
class ImputationError {
public:
    explicit ImputationError(std::size_t modalities);

    /// Adds rows i with validity[i] != 0 and lambda[m][i] == 0.
    void add(std::size_t m, const Tensor& reconstruction, const Tensor& target,
             std::span<const std::uint8_t> lambda, std::span<const double> validity);

    /// Mean squared error over missing scalars; nullopt when modality m had none.
    std::optional<double> mse(std::size_t m) const;
    std::vector<std::optional<double>> mse() const;
    std::size_t modalities() const { return sums_.size(); }

private:
    std::vector<double> sums_;
    std::vector<std::size_t> counts_;
};

} // namespace gcnet::eval
