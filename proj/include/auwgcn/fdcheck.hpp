#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "auwgcn/tensor.hpp"

namespace auwgcn {

struct FdOptions {
    double eps = 1e-3;
    // coordinates sampled per parameter; <= 0 checks every coordinate
    int coords_per_param = -1;
    std::uint64_t seed = 0;
    // Relative-error denominator floor. Checks running through the f32
    // pipeline raise it to the FD noise scale, which turns the comparison
    // at sub-floor gradients into an absolute one (|a - fd| <= tol * floor).
    double denominator_floor = 1e-6;
    // Optional: queried right after each loss evaluation. When the two
    // signatures of a +/-eps pair differ, the loss is not smooth on that
    // interval (a relu changed sides) and the coordinate is skipped, since
    // a central difference estimates nothing there. Leave empty for smooth
    // losses.
    std::function<std::uint64_t()> eval_signature;
    // out: coordinates skipped by the signature guard
    int* skipped = nullptr;
};

// Central-difference gradient check. `loss_fn` re-evaluates the scalar loss
// from the current parameter values; `params[i]->grad` must already hold the
// analytic gradients for those values. Returns the max relative error over
// the checked coordinates, denominator floored at 1e-6. `worst` (optional)
// receives a description of the worst coordinate.
double finite_diff_check(const std::function<double()>& loss_fn,
                         const std::vector<Parameter*>& params,
                         const FdOptions& opts = {},
                         std::string* worst = nullptr);

}  // namespace auwgcn
