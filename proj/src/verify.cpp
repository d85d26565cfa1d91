#include "auwgcn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <memory>
#include <sstream>

#include "auwgcn/adam.hpp"
#include "auwgcn/au_prior.hpp"
#include "auwgcn/evaluation.hpp"
#include "auwgcn/fdcheck.hpp"
#include "auwgcn/model.hpp"
#include "auwgcn/ops.hpp"
#include "auwgcn/reference.hpp"
#include "auwgcn/rng.hpp"
#include "auwgcn/spotting.hpp"
#include "auwgcn/training.hpp"

namespace auwgcn {

namespace {

constexpr std::uint64_t kSeedBase = 20240911;

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

// inputs bounded away from the relu kink by more than the FD step
Tensor random_tensor_off_zero(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) {
        const double mag = rng.uniform(0.05, 2.0);
        v = static_cast<float>(rng.uniform() < 0.5 ? -mag : mag);
    }
    return t;
}

double weighted_sum(const Tensor& t, const Tensor& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.numel(); ++i) acc += static_cast<double>(t.data[i]) * w.data[i];
    return acc;
}

struct GradCase {
    std::vector<Parameter*> params;
    std::function<double()> loss;
    std::function<void()> grads;  // fills params' grads for the current values
    std::function<std::uint64_t()> signature;  // optional relu-kink guard
};

using CaseBuilder = std::function<GradCase(Rng&, std::vector<std::unique_ptr<Parameter>>&)>;

CheckResult run_grad_check(const std::string& name, const VerifyOptions& opts, double eps,
                           double tolerance, int coords_per_param, double denominator_floor,
                           const CaseBuilder& build) {
    CheckResult res;
    res.name = "grad/" + name;
    double max_err = 0.0;
    std::string worst;
    for (int s = 0; s < opts.grad_seeds; ++s) {
        Rng rng(mix_seed(kSeedBase, fnv1a(name) + static_cast<std::uint64_t>(s)));
        std::vector<std::unique_ptr<Parameter>> storage;
        GradCase c = build(rng, storage);
        for (Parameter* p : c.params) p->zero_grad();
        c.grads();
        if (opts.inject_bug == name && !c.params.empty()) {
            c.params[0]->grad.data[0] += 0.5f;  // deliberate corruption for harness tests
        }
        FdOptions fd;
        fd.eps = eps;
        fd.coords_per_param = coords_per_param;
        fd.seed = mix_seed(kSeedBase ^ 0xFD, static_cast<std::uint64_t>(s));
        fd.eval_signature = c.signature;
        fd.denominator_floor = denominator_floor;
        std::string w;
        const double err = finite_diff_check(c.loss, c.params, fd, &w);
        if (err > max_err) {
            max_err = err;
            worst = w;
        }
    }
    res.max_err = max_err;
    res.pass = max_err <= tolerance;
    std::ostringstream d;
    d << "max_rel_err=" << max_err << " tol=" << tolerance << " seeds=" << opts.grad_seeds;
    if (!res.pass) d << " worst: " << worst;
    res.detail = d.str();
    return res;
}

Parameter* stash(std::vector<std::unique_ptr<Parameter>>& storage, Tensor t) {
    storage.push_back(std::make_unique<Parameter>(std::move(t)));
    return storage.back().get();
}

KindMaps random_maps(Rng& rng, int T, int quantum) {
    KindMaps m;
    auto fill = [&](std::vector<float>& v) {
        v.resize(static_cast<std::size_t>(T));
        for (auto& x : v) {
            x = static_cast<float>(static_cast<double>(rng.uniform_int(0, quantum)) / quantum);
        }
    };
    fill(m.exp);
    fill(m.s);
    fill(m.ap);
    fill(m.e);
    fill(m.bg);
    return m;
}

bool proposals_equal(const std::vector<Proposal>& a, const std::vector<Proposal>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].start != b[i].start || a[i].end != b[i].end || a[i].score != b[i].score ||
            a[i].kind != b[i].kind) {
            return false;
        }
    }
    return true;
}

WindowSample random_window(Rng& rng, int l_w, int valid) {
    WindowSample w;
    w.feats = random_tensor({l_w, kRoiCount, kFlowChannels}, rng, -1.0, 1.0);
    w.valid = valid;
    w.window_start = 0;
    for (KindTargets* tg : {&w.macro, &w.micro}) {
        tg->exp.resize(static_cast<std::size_t>(l_w));
        tg->cls.resize(static_cast<std::size_t>(l_w));
        for (int t = 0; t < l_w; ++t) {
            tg->exp[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
            tg->cls[static_cast<std::size_t>(t)] = static_cast<std::uint8_t>(rng.uniform_int(0, 3));
        }
    }
    return w;
}

TrainConfig focal_cfg() {
    TrainConfig cfg;
    cfg.alpha = 0.75;
    cfg.gamma = 2.0;
    return cfg;
}

CheckResult check_alg1_oracle(const VerifyOptions& opts) {
    CheckResult res;
    res.name = "oracle/proposal_generation";
    int failures = 0;
    for (int s = 0; s < opts.oracle_instances; ++s) {
        Rng rng(mix_seed(kSeedBase, 0xA1900 + static_cast<std::uint64_t>(s)));
        const int T = static_cast<int>(rng.uniform_int(3, 64));
        const KindMaps maps = random_maps(rng, T, 20);
        const double thr = rng.uniform(0.05, 0.95);
        const int k_dis = static_cast<int>(rng.uniform_int(1, 10));
        const Kind kind = rng.uniform() < 0.5 ? Kind::macro : Kind::micro;
        const auto got = generate_proposals(maps, kind, thr, k_dis);
        const auto want = reference::generate_proposals_naive(maps, kind, thr, k_dis);
        if (!proposals_equal(got, want)) ++failures;
    }
    res.pass = failures == 0;
    res.detail = std::to_string(opts.oracle_instances) + " instances, " + std::to_string(failures) + " mismatches";
    return res;
}

std::vector<Proposal> random_proposals(Rng& rng, int max_count, Kind kind) {
    const int n = static_cast<int>(rng.uniform_int(0, max_count));
    std::vector<Proposal> out;
    for (int i = 0; i < n; ++i) {
        Proposal p;
        p.start = static_cast<int>(rng.uniform_int(0, 45));
        p.end = p.start + static_cast<int>(rng.uniform_int(1, 12));
        p.score = static_cast<double>(rng.uniform_int(1, 20)) / 20.0;  // ties likely
        p.kind = kind;
        out.push_back(p);
    }
    return out;
}

CheckResult check_nms_oracle(const VerifyOptions& opts) {
    CheckResult res;
    res.name = "oracle/nms";
    int failures = 0;
    for (int s = 0; s < opts.oracle_instances; ++s) {
        Rng rng(mix_seed(kSeedBase, 0xB5000 + static_cast<std::uint64_t>(s)));
        const auto props = random_proposals(rng, 20, Kind::macro);
        const double thr = rng.uniform(0.2, 0.9);
        const auto got = nms(props, thr);
        const auto want = reference::nms_naive(props, thr);
        if (!proposals_equal(got, want)) ++failures;
    }
    res.pass = failures == 0;
    res.detail = std::to_string(opts.oracle_instances) + " instances, " + std::to_string(failures) + " mismatches";
    return res;
}

CheckResult check_match_oracle(const VerifyOptions& opts) {
    CheckResult res;
    res.name = "oracle/iou_matching";
    int failures = 0;
    for (int s = 0; s < opts.oracle_instances; ++s) {
        Rng rng(mix_seed(kSeedBase, 0xC3000 + static_cast<std::uint64_t>(s)));
        const auto props = random_proposals(rng, 20, Kind::macro);
        std::vector<AnnotationInstance> gts;
        const int n = static_cast<int>(rng.uniform_int(0, 8));
        for (int i = 0; i < n; ++i) {
            AnnotationInstance a;
            a.onset = static_cast<int>(rng.uniform_int(0, 45));
            a.offset = a.onset + static_cast<int>(rng.uniform_int(1, 12));
            a.apex = (a.onset + a.offset) / 2;
            a.kind = Kind::macro;
            gts.push_back(a);
        }
        const double k_iou = rng.uniform(0.3, 0.7);
        const auto got = match(props, gts, Kind::macro, k_iou);
        const auto want = reference::match_naive(props, gts, Kind::macro, k_iou);
        bool same = got.tp == want.tp && got.fp == want.fp && got.fn == want.fn &&
                    got.matches.size() == want.matches.size();
        if (same) {
            for (std::size_t i = 0; i < got.matches.size(); ++i) {
                same = same && got.matches[i].proposal_index == want.matches[i].proposal_index &&
                       got.matches[i].ground_truth_index == want.matches[i].ground_truth_index;
            }
        }
        if (!same) ++failures;
    }
    res.pass = failures == 0;
    res.detail = std::to_string(opts.oracle_instances) + " instances, " + std::to_string(failures) + " mismatches";
    return res;
}

AuRoiMap random_map(Rng& rng) {
    AuRoiMap map;
    const int aus = static_cast<int>(rng.uniform_int(3, 8));
    for (int i = 0; i < aus; ++i) {
        const std::string au = "AU" + std::to_string(rng.uniform_int(1, 30));
        std::vector<int> rois;
        const int n = static_cast<int>(rng.uniform_int(1, 3));
        for (int j = 0; j < n; ++j) rois.push_back(static_cast<int>(rng.uniform_int(0, kRoiCount - 1)));
        std::sort(rois.begin(), rois.end());
        rois.erase(std::unique(rois.begin(), rois.end()), rois.end());
        map.entries[au] = rois;
    }
    return map;
}

CheckResult check_adjacency_oracle(const VerifyOptions& opts) {
    CheckResult res;
    res.name = "oracle/adjacency";
    int failures = 0;
    double worst_radius = 0.0;

    // all-zero raw counts normalize to the identity
    {
        const Tensor id = normalize_adjacency(CountMatrix{});
        for (int i = 0; i < kRoiCount; ++i) {
            for (int j = 0; j < kRoiCount; ++j) {
                if (std::fabs(id(i, j) - (i == j ? 1.0f : 0.0f)) > 1e-7f) ++failures;
            }
        }
    }

    for (int s = 0; s < opts.oracle_instances; ++s) {
        Rng rng(mix_seed(kSeedBase, 0xD7000 + static_cast<std::uint64_t>(s)));
        const AuRoiMap map = random_map(rng);
        std::vector<std::string> all_aus;
        for (const auto& [au, rois] : map.entries) all_aus.push_back(au);
        all_aus.push_back("AU99");  // unmapped, must be skipped

        std::vector<AnnotationInstance> anns;
        const int n = static_cast<int>(rng.uniform_int(0, 50));
        for (int i = 0; i < n; ++i) {
            AnnotationInstance a;
            a.onset = 0;
            a.apex = 1;
            a.offset = 2;
            a.kind = Kind::macro;
            const int k = static_cast<int>(rng.uniform_int(0, 3));
            for (int j = 0; j < k; ++j) {
                a.aus.push_back(all_aus[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(all_aus.size()) - 1))]);
            }
            std::sort(a.aus.begin(), a.aus.end());
            a.aus.erase(std::unique(a.aus.begin(), a.aus.end()), a.aus.end());
            anns.push_back(a);
        }
        const CountMatrix got = count_cooccurrence(anns, map);
        const CountMatrix want = reference::cooccurrence_naive(anns, map);
        if (got != want) {
            ++failures;
            continue;
        }
        const Tensor norm = normalize_adjacency(got);
        for (int i = 0; i < kRoiCount; ++i) {
            for (int j = 0; j < i; ++j) {
                if (norm(i, j) != norm(j, i)) ++failures;
            }
        }
        worst_radius = std::max(worst_radius, reference::spectral_radius(norm));
    }
    res.pass = failures == 0 && worst_radius <= 1.0 + 1e-6;
    res.max_err = worst_radius;
    res.detail = std::to_string(opts.oracle_instances) + " instances, " + std::to_string(failures) +
                 " mismatches, max spectral radius " + std::to_string(worst_radius);
    return res;
}

CheckResult check_receptive_field(const VerifyOptions& opts) {
    CheckResult res;
    res.name = "oracle/receptive_field";
    const int T = 32;
    const int radius = 5;  // neck+head stack: dilations 1,2,2 with k=3
    int failures = 0;
    const int rounds = std::max(1, std::min(5, opts.grad_seeds));
    for (int s = 0; s < rounds; ++s) {
        Rng rng(mix_seed(kSeedBase, 0xEF000 + static_cast<std::uint64_t>(s)));
        ModelConfig cfg;
        cfg.init_seed = mix_seed(kSeedBase, 0xEF100 + static_cast<std::uint64_t>(s));
        const ModelParams params = init_params(cfg);
        const Tensor A = uniform_adjacency();
        const Tensor base = random_tensor({T, kRoiCount, kFlowChannels}, rng, -0.5, 0.5);
        const Tensor base_logits = forward(params, A, base);
        for (int tp = 0; tp < T; ++tp) {
            Tensor bumped = base;
            for (int i = 0; i < kRoiCount; ++i) {
                for (int c = 0; c < kFlowChannels; ++c) bumped(tp, i, c) += 5.0f;
            }
            const Tensor logits = forward(params, A, bumped);
            for (int t = 0; t < T; ++t) {
                double diff = 0.0;
                for (int ch = 0; ch < 10; ++ch) {
                    diff = std::max(diff, std::fabs(static_cast<double>(logits(ch, t)) - base_logits(ch, t)));
                }
                const bool changed = diff > 1e-9;
                const bool inside = std::abs(t - tp) <= radius;
                if (changed != inside) ++failures;
            }
        }
    }
    res.pass = failures == 0;
    res.detail = std::to_string(rounds) + " param draws x " + std::to_string(T) +
                 " frame perturbations, " + std::to_string(failures) + " locality violations";
    return res;
}

}  // namespace

std::vector<CheckResult> run_verification(const VerifyOptions& opts) {
    std::vector<CheckResult> results;
    auto wanted = [&](const std::string& name) {
        if (opts.select.empty()) return true;
        for (const auto& want : opts.select) {
            if (want == name) return true;
        }
        return false;
    };
    auto add = [&](const char* name, auto&& fn) {
        if (wanted(name)) results.push_back(fn());
    };

    add("grad/matmul", [&] { return run_grad_check(
        "matmul", opts, 1e-3, 1e-3, -1, 1e-6, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            Parameter* a = stash(st, random_tensor({5, 4}, rng));
            Parameter* b = stash(st, random_tensor({4, 3}, rng));
            auto w = std::make_shared<Tensor>(random_tensor({5, 3}, rng, -1.0, 1.0));
            GradCase c;
            c.params = {a, b};
            c.loss = [a, b, w] { return reference::matmul_loss_f64(a->value, b->value, *w); };
            c.grads = [a, b, w] { matmul_backward(a->value, b->value, *w, a->grad, b->grad); };
            return c;
        }); });

    add("grad/relu", [&] { return run_grad_check(
        "relu", opts, 1e-3, 1e-3, -1, 1e-6, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            Parameter* x = stash(st, random_tensor_off_zero({6, 7}, rng));
            auto w = std::make_shared<Tensor>(random_tensor({6, 7}, rng, -1.0, 1.0));
            GradCase c;
            c.params = {x};
            c.loss = [x, w] { return reference::relu_loss_f64(x->value, *w); };
            c.grads = [x, w] {
                const Tensor g = relu_backward(x->value, *w);
                for (std::size_t i = 0; i < g.numel(); ++i) x->grad.data[i] += g.data[i];
            };
            return c;
        }); });

    add("grad/conv1d", [&] { return run_grad_check(
        "conv1d", opts, 1e-3, 1e-3, -1, 1e-6, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            Parameter* x = stash(st, random_tensor({3, 11}, rng));
            Parameter* w = stash(st, random_tensor({2, 3, 3}, rng, -1.0, 1.0));
            Parameter* b = stash(st, random_tensor({2}, rng, -0.5, 0.5));
            auto lw = std::make_shared<Tensor>(random_tensor({2, 11}, rng, -1.0, 1.0));
            GradCase c;
            c.params = {x, w, b};
            c.loss = [x, w, b, lw] { return reference::conv1d_loss_f64(x->value, w->value, b->value, 2, *lw); };
            c.grads = [x, w, b, lw] {
                conv1d_backward(x->value, w->value, *lw, 2, x->grad, w->grad, b->grad);
            };
            return c;
        }); });

    add("grad/sigmoid", [&] { return run_grad_check(
        "sigmoid", opts, 1e-3, 1e-3, -1, 1e-6, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            Parameter* x = stash(st, random_tensor({4, 6}, rng));
            auto w = std::make_shared<Tensor>(random_tensor({4, 6}, rng, -1.0, 1.0));
            GradCase c;
            c.params = {x};
            c.loss = [x, w] { return reference::sigmoid_loss_f64(x->value, *w); };
            c.grads = [x, w] {
                const Tensor g = sigmoid_backward(sigmoid(x->value), *w);
                for (std::size_t i = 0; i < g.numel(); ++i) x->grad.data[i] += g.data[i];
            };
            return c;
        }); });

    add("grad/softmax", [&] { return run_grad_check(
        "softmax", opts, 1e-3, 1e-3, -1, 1e-6, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            Parameter* x = stash(st, random_tensor({4, 5}, rng));
            auto w = std::make_shared<Tensor>(random_tensor({4, 5}, rng, -1.0, 1.0));
            GradCase c;
            c.params = {x};
            c.loss = [x, w] { return reference::softmax_loss_f64(x->value, *w); };
            c.grads = [x, w] {
                const Tensor g = softmax_backward(softmax_over_channels(x->value), *w);
                for (std::size_t i = 0; i < g.numel(); ++i) x->grad.data[i] += g.data[i];
            };
            return c;
        }); });

    add("grad/focal_loss", [&] { return run_grad_check(
        "focal_loss", opts, 1e-3, 1e-3, -1, 1e-6, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            const int l_w = 6;
            Parameter* logits = stash(st, random_tensor({10, l_w}, rng, -3.0, 3.0));
            auto sample = std::make_shared<WindowSample>(random_window(rng, l_w, l_w - 1));
            auto cfg = std::make_shared<TrainConfig>(focal_cfg());
            GradCase c;
            c.params = {logits};
            c.loss = [logits, sample, cfg] { return reference::focal_loss_f64(logits->value, *sample, *cfg); };
            c.grads = [logits, sample, cfg] {
                const FocalResult fr = focal_loss(decode_probabilities(logits->value), *sample, *cfg);
                for (std::size_t i = 0; i < fr.dlogits.numel(); ++i) logits->grad.data[i] += fr.dlogits.data[i];
            };
            return c;
        }); });

    // full network, loss = weighted sum of logits
    add("grad/model", [&] { return run_grad_check(
        "model", opts, 1e-3, 1e-2, 20, 1e-2, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            const int T = 8;
            ModelConfig cfg;
            cfg.init_seed = rng.uniform_int(0, 1'000'000'000);
            auto params = std::make_shared<ModelParams>(init_params(cfg));
            auto A = std::make_shared<Tensor>(uniform_adjacency());
            auto feats = std::make_shared<Tensor>(random_tensor({T, kRoiCount, kFlowChannels}, rng, -1.0, 1.0));
            auto w = std::make_shared<Tensor>(random_tensor({10, T}, rng, -1.0, 1.0));
            (void)st;
            GradCase c;
            c.params = params->all();
            auto tape = std::make_shared<ForwardTape>();
            c.loss = [params, A, feats, w, tape] {
                return weighted_sum(forward(*params, *A, *feats, tape.get()), *w);
            };
            c.signature = [tape] { return relu_signature(*tape); };
            c.grads = [params, A, feats, w] {
                ForwardTape t;
                forward(*params, *A, *feats, &t);
                backward(*params, t, *w);
            };
            return c;
        }); });

    // full network + decoding + focal loss
    add("grad/composite", [&] { return run_grad_check(
        "composite", opts, 1e-3, 1e-2, 20, 1e-2, [](Rng& rng, std::vector<std::unique_ptr<Parameter>>& st) {
            const int l_w = 8;
            ModelConfig cfg;
            cfg.init_seed = rng.uniform_int(0, 1'000'000'000);
            auto params = std::make_shared<ModelParams>(init_params(cfg));
            auto A = std::make_shared<Tensor>(uniform_adjacency());
            auto sample = std::make_shared<WindowSample>(random_window(rng, l_w, l_w - 1));
            auto tcfg = std::make_shared<TrainConfig>(focal_cfg());
            (void)st;
            GradCase c;
            c.params = params->all();
            auto tape = std::make_shared<ForwardTape>();
            c.loss = [params, A, sample, tcfg, tape] {
                const Tensor logits = forward(*params, *A, sample->feats, tape.get());
                return focal_loss(decode_probabilities(logits), *sample, *tcfg).loss;
            };
            c.signature = [tape] { return relu_signature(*tape); };
            c.grads = [params, A, sample, tcfg] {
                ForwardTape t;
                forward(*params, *A, sample->feats, &t);
                const FocalResult fr = focal_loss(decode_probabilities(t.logits), *sample, *tcfg);
                backward(*params, t, fr.dlogits);
            };
            return c;
        }); });

    add("oracle/proposal_generation", [&] { return check_alg1_oracle(opts); });
    add("oracle/nms", [&] { return check_nms_oracle(opts); });
    add("oracle/iou_matching", [&] { return check_match_oracle(opts); });
    add("oracle/adjacency", [&] { return check_adjacency_oracle(opts); });
    add("oracle/receptive_field", [&] { return check_receptive_field(opts); });
    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.pass; });
}

}  // namespace auwgcn
