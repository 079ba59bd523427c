#pragma once

#include "gcnet/autodiff/tape.hpp"
#include "gcnet/model/gcnet.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace gcnet::training {

/// Mean cross-entropy over rows with validity != 0, from logits via log-sum-exp.
/// Throws std::invalid_argument when no row is valid.
ad::Var classification_loss(ad::Var logits, std::span<const int> labels, std::span<const double> validity);

/// Same quantity from probabilities: mean of -log p(true class) over valid rows.
double classification_loss(const Tensor& probs, std::span<const int> labels, std::span<const double> validity);

/// sum_m 1/(d_m * L) * sum_i valid_i * (1 - lambda_i^m) * ||xhat_i^m - x_i^m||^2,
/// with L the number of valid rows. Observed positions never contribute.
ad::Var reconstruction_loss(std::span<const ad::Var> reconstructions, std::span<const Tensor> targets,
                            const std::vector<std::vector<std::uint8_t>>& lambda, std::span<const double> validity);

/// cls + rec, or cls alone for the no_reconstruction variant.
double joint_loss(double cls, double rec, model::Variant variant);
ad::Var joint_loss(ad::Var cls, ad::Var rec, model::Variant variant);

} // namespace gcnet::training
