#pragma once

#include <cstdint>
#include <vector>

#include "auwgcn/tensor.hpp"

namespace auwgcn {

struct AdamState {
    Tensor m;
    Tensor v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(const std::vector<int>& shape) : m(shape), v(shape) {}
};

// One bias-corrected Adam update; zeroes the gradient afterwards.
void adam_step(Parameter& param, AdamState& state, double lr);

// Convenience wrapper holding one state per parameter.
class AdamOptimizer {
public:
    AdamOptimizer(const std::vector<Parameter*>& params, double lr);
    void step();

private:
    std::vector<Parameter*> params_;
    std::vector<AdamState> states_;
    double lr_;
};

}  // namespace auwgcn
