#pragma once

#include "gcnet/autodiff/tape.hpp"

#include <cstdint>
#include <vector>

namespace gcnet::training {

struct AdamConfig {
    double learning_rate = 1e-3;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const ad::ParamSet& params);

/// Classic Adam with L2 decay folded into the gradient (g + wd * theta),
/// bias-corrected moments. Reads p.grad; does not clear it.
void adam_step(ad::ParamSet& params, AdamState& state, const AdamConfig& config);

} // namespace gcnet::training
