#include "gcnet/training/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gcnet::training {

AdamState make_adam_state(const ad::ParamSet& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.shape());
        s.v.emplace_back(p.value.shape());
    }
    return s;
}

void adam_step(ad::ParamSet& params, AdamState& state, const AdamConfig& config) {
    if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state does not match parameters");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    std::size_t k = 0;
    for (auto& p : params) {
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        ++k;
        if (!m.same_shape(p.value) || !p.grad.same_shape(p.value))
            throw DimensionError("adam_step: shape mismatch for '" + p.name + "'");
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i] + config.weight_decay * p.value[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p.value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

} // namespace gcnet::training
