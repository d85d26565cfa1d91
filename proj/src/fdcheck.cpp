#include "auwgcn/fdcheck.hpp"

#include <algorithm>
#include <cmath>

#include "auwgcn/rng.hpp"

namespace auwgcn {

double finite_diff_check(const std::function<double()>& loss_fn,
                         const std::vector<Parameter*>& params,
                         const FdOptions& opts,
                         std::string* worst) {
    Rng rng(mix_seed(opts.seed, 0x7d1));
    double max_rel = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        const std::size_t n = p.value.numel();
        std::vector<std::size_t> coords;
        if (opts.coords_per_param <= 0 || static_cast<std::size_t>(opts.coords_per_param) >= n) {
            coords.resize(n);
            for (std::size_t i = 0; i < n; ++i) coords[i] = i;
        } else {
            for (int i = 0; i < opts.coords_per_param; ++i) {
                coords.push_back(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1)));
            }
        }
        for (std::size_t ci : coords) {
            const float saved = p.value.data[ci];
            const float up = static_cast<float>(static_cast<double>(saved) + opts.eps);
            const float dn = static_cast<float>(static_cast<double>(saved) - opts.eps);
            p.value.data[ci] = up;
            const double fp = loss_fn();
            const std::uint64_t sig_up = opts.eval_signature ? opts.eval_signature() : 0;
            p.value.data[ci] = dn;
            const double fm = loss_fn();
            const std::uint64_t sig_dn = opts.eval_signature ? opts.eval_signature() : 0;
            p.value.data[ci] = saved;
            if (sig_up != sig_dn) {
                if (opts.skipped) ++*opts.skipped;
                continue;
            }
            // the realized step after f32 rounding, not the nominal eps
            const double h = (static_cast<double>(up) - static_cast<double>(dn)) / 2.0;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = p.grad.data[ci];
            const double denom = std::max(opts.denominator_floor, std::max(std::fabs(fd), std::fabs(an)));
            const double rel = std::fabs(fd - an) / denom;
            if (rel > max_rel) {
                max_rel = rel;
                if (worst) {
                    *worst = "param " + std::to_string(pi) + " coord " + std::to_string(ci) +
                             " analytic " + std::to_string(an) + " fd " + std::to_string(fd);
                }
            }
        }
    }
    return max_rel;
}

}  // namespace auwgcn
