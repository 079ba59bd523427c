#include "gcnet/training/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace gcnet::training {

namespace {

std::size_t count_valid(std::span<const double> validity) {
    std::size_t n = 0;
    for (double v : validity) n += v != 0.0;
    return n;
}

} // namespace

ad::Var classification_loss(ad::Var logits, std::span<const int> labels, std::span<const double> validity) {
    const std::size_t n = count_valid(validity);
    if (n == 0) throw std::invalid_argument("classification_loss: no valid utterances");
    std::vector<double> weights(validity.size());
    for (std::size_t i = 0; i < validity.size(); ++i) weights[i] = validity[i] != 0.0 ? 1.0 / static_cast<double>(n) : 0.0;
    return ad::cross_entropy(logits, labels, weights);
}

double classification_loss(const Tensor& probs, std::span<const int> labels, std::span<const double> validity) {
    const std::size_t n = count_valid(validity);
    if (n == 0) throw std::invalid_argument("classification_loss: no valid utterances");
    if (probs.rows() != labels.size() || labels.size() != validity.size())
        throw DimensionError("classification_loss: row counts disagree");
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (validity[i] == 0.0) continue;
        total -= std::log(probs(i, static_cast<std::size_t>(labels[i])));
    }
    return total / static_cast<double>(n);
}

ad::Var reconstruction_loss(std::span<const ad::Var> reconstructions, std::span<const Tensor> targets,
                            const std::vector<std::vector<std::uint8_t>>& lambda, std::span<const double> validity) {
    if (reconstructions.empty() || reconstructions.size() != targets.size() || lambda.size() != targets.size())
        throw DimensionError("reconstruction_loss: modality counts disagree");
    const std::size_t n = count_valid(validity);
    if (n == 0) throw std::invalid_argument("reconstruction_loss: no valid utterances");
    ad::Var total;
    for (std::size_t m = 0; m < reconstructions.size(); ++m) {
        const Tensor& target = targets[m];
        if (lambda[m].size() != validity.size())
            throw DimensionError("reconstruction_loss: mask length differs from validity length");
        const double norm = 1.0 / (static_cast<double>(target.cols()) * static_cast<double>(n));
        std::vector<double> weights(validity.size(), 0.0);
        for (std::size_t i = 0; i < validity.size(); ++i)
            if (validity[i] != 0.0 && !lambda[m][i]) weights[i] = norm;
        const ad::Var term = ad::squared_error(reconstructions[m], target, weights);
        total = total.valid() ? ad::add(total, term) : term;
    }
    return total;
}

double joint_loss(double cls, double rec, model::Variant variant) {
    return variant == model::Variant::no_reconstruction ? cls : cls + rec;
}

ad::Var joint_loss(ad::Var cls, ad::Var rec, model::Variant variant) {
    return variant == model::Variant::no_reconstruction ? cls : ad::add(cls, rec);
}

} // namespace gcnet::training
