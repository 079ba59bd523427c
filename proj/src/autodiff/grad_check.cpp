#include "gcnet/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace gcnet::ad {

namespace {

double evaluate(const LossBuilder& loss, ParamSet& params) {
    Tape tape;
    Var out = loss(tape, params);
    if (!out.value().is_scalar())
        throw DimensionError("grad_check: loss must be scalar, got " + shape_to_string(out.shape()));
    return out.value().item();
}

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

} // namespace

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport grad_check(const LossBuilder& loss, ParamSet& params, double eps, double tol) {
    if (!(eps > 0.0)) throw std::invalid_argument("grad_check: step must be positive");

    const double first = evaluate(loss, params);
    const double second = evaluate(loss, params);
    if (!bitwise_equal(first, second)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "grad_check: loss is not deterministic (" << first << " vs " << second
            << " at identical parameters); disable dropout or fix the seed";
        throw NondeterministicLossError(msg.str());
    }

    params.zero_grad();
    {
        Tape tape;
        Var out = loss(tape, params);
        tape.backward(out);
    }

    GradCheckReport report;
    report.tolerance = tol;
    report.passed = true;
    for (auto& p : params) {
        ParamCheck check{p.name};
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double saved = p.value[k];
            p.value[k] = saved + eps;
            const double up = evaluate(loss, params);
            p.value[k] = saved - eps;
            const double down = evaluate(loss, params);
            p.value[k] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = relative_error(p.grad[k], numeric);
            if (k == 0 || err > check.max_rel_error) {
                check.max_rel_error = err;
                check.worst_index = k;
                check.analytic = p.grad[k];
                check.numeric = numeric;
            }
        }
        if (check.max_rel_error > tol) report.passed = false;
        if (report.params.empty() || check.max_rel_error > report.max_rel_error) {
            report.max_rel_error = check.max_rel_error;
            report.worst_param = check.name;
            report.worst_index = check.worst_index;
        }
        report.params.push_back(std::move(check));
    }
    return report;
}

} // namespace gcnet::ad
