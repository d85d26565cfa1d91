#pragma once

#include <string>
#include <vector>

namespace auwgcn {

struct VerifyOptions {
    int grad_seeds = 100;        // random instances per gradient check
    int oracle_instances = 200;  // random instances per oracle comparison
    // name of a gradient check to corrupt on purpose; exercises failure reporting
    std::string inject_bug;
    // run only the checks whose full name appears here; empty runs everything
    std::vector<std::string> select;
};

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_err = 0.0;   // max relative error for gradient checks
    std::string detail;
};

// Gradient checks for every differentiable op plus the full composite, and
// oracle comparisons for proposal generation, NMS, matching, the prior
// adjacency, and the receptive field.
std::vector<CheckResult> run_verification(const VerifyOptions& opts);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace auwgcn
