#include "auwgcn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace auwgcn {

void adam_step(Parameter& param, AdamState& state, double lr) {
    if (!state.m.same_shape(param.value) || !state.v.same_shape(param.value)) {
        throw std::invalid_argument("adam state shape mismatch");
    }
    state.t += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < param.value.numel(); ++i) {
        const double g = param.grad.data[i];
        const double m = b1 * state.m.data[i] + (1.0 - b1) * g;
        const double v = b2 * state.v.data[i] + (1.0 - b2) * g * g;
        state.m.data[i] = static_cast<float>(m);
        state.v.data[i] = static_cast<float>(v);
        const double mhat = m / corr1;
        const double vhat = v / corr2;
        param.value.data[i] = static_cast<float>(param.value.data[i] - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
    param.zero_grad();
    check_finite(param.value, "adam_step");
}

AdamOptimizer::AdamOptimizer(const std::vector<Parameter*>& params, double lr)
    : params_(params), lr_(lr) {
    states_.reserve(params.size());
    for (const Parameter* p : params) states_.emplace_back(p->value.shape);
}

void AdamOptimizer::step() {
    for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i], lr_);
}

}  // namespace auwgcn
