#pragma once

#include "gcnet/autodiff/tape.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcnet::ad {

/// Builds a scalar loss on `tape` from the parameters. Must be deterministic.
using LossBuilder = std::function<Var(Tape& tape, ParamSet& params)>;

class NondeterministicLossError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ParamCheck {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;  // at worst_index
    double numeric = 0.0;   // at worst_index
};

struct GradCheckReport {
    std::vector<ParamCheck> params;  // one entry per parameter, in set order
    double tolerance = 0.0;
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    bool passed = false;
};

/// Relative error |a - n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients with central differences
/// (f(θ+ε) - f(θ-ε)) / 2ε over every scalar coordinate of every parameter.
/// Passes iff every relative error is <= tol. Parameter values are restored.
GradCheckReport grad_check(const LossBuilder& loss, ParamSet& params, double eps, double tol);

} // namespace gcnet::ad
