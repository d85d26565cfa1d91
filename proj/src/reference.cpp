#include "auwgcn/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "auwgcn/evaluation.hpp"
#include "auwgcn/rng.hpp"

namespace auwgcn::reference {

Tensor conv1d_naive(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation) {
    const int cin = input.dim(0), T = input.dim(1);
    const int cout = weight.dim(0), k = weight.dim(2);
    const int pad = (k - 1) / 2 * dilation;
    Tensor out({cout, T});
    for (int co = 0; co < cout; ++co) {
        for (int t = 0; t < T; ++t) {
            double acc = bias.data[static_cast<std::size_t>(co)];
            for (int ci = 0; ci < cin; ++ci) {
                for (int j = 0; j < k; ++j) {
                    const int src = t + j * dilation - pad;
                    if (src < 0 || src >= T) continue;
                    acc += static_cast<double>(weight(co, ci, j)) * input(ci, src);
                }
            }
            out(co, t) = static_cast<float>(acc);
        }
    }
    return out;
}

Tensor model_forward_naive(const ModelParams& params, const Tensor& adjacency, const Tensor& feats) {
    const int T = feats.dim(0);
    const int n = params.cfg.node_count();

    // per-frame GCN stack
    std::vector<std::vector<double>> x(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        x[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(n) * params.cfg.input_dim());
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < params.cfg.input_dim(); ++j) {
                x[static_cast<std::size_t>(t)][static_cast<std::size_t>(i) * params.cfg.input_dim() + j] =
                    feats(t, i, j);
            }
        }
    }
    for (const auto& wp : params.gcn_w) {
        const int d_in = wp.value.dim(0), d_out = wp.value.dim(1);
        for (int t = 0; t < T; ++t) {
            auto& cur = x[static_cast<std::size_t>(t)];
            // ax = A * X
            std::vector<double> ax(static_cast<std::size_t>(n) * d_in, 0.0);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < d_in; ++j) {
                    double acc = 0.0;
                    for (int p = 0; p < n; ++p) {
                        acc += static_cast<double>(adjacency(i, p)) * cur[static_cast<std::size_t>(p) * d_in + j];
                    }
                    ax[static_cast<std::size_t>(i) * d_in + j] = acc;
                }
            }
            // relu(ax * W)
            std::vector<double> next(static_cast<std::size_t>(n) * d_out, 0.0);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < d_out; ++j) {
                    double acc = 0.0;
                    for (int p = 0; p < d_in; ++p) {
                        acc += ax[static_cast<std::size_t>(i) * d_in + p] * static_cast<double>(wp.value(p, j));
                    }
                    next[static_cast<std::size_t>(i) * d_out + j] = std::max(0.0, acc);
                }
            }
            cur = std::move(next);
        }
    }

    const int d_last = params.cfg.gcn_hidden.back();
    const int flat_dim = n * d_last;
    std::vector<std::vector<double>> layer(static_cast<std::size_t>(flat_dim),
                                           std::vector<double>(static_cast<std::size_t>(T)));
    for (int f = 0; f < flat_dim; ++f) {
        for (int t = 0; t < T; ++t) layer[static_cast<std::size_t>(f)][static_cast<std::size_t>(t)] =
            x[static_cast<std::size_t>(t)][static_cast<std::size_t>(f)];
    }

    struct ConvSpec {
        const Parameter* w;
        const Parameter* b;
        int dilation;
        bool relu;
    };
    const ConvSpec convs[3] = {
        {&params.conv1_w, &params.conv1_b, params.cfg.dilations[0], true},
        {&params.conv2_w, &params.conv2_b, params.cfg.dilations[1], true},
        {&params.conv3_w, &params.conv3_b, params.cfg.dilations[2], false},
    };
    for (const auto& spec : convs) {
        const int cout = spec.w->value.dim(0);
        const int cin = spec.w->value.dim(1);
        const int k = spec.w->value.dim(2);
        const int pad = (k - 1) / 2 * spec.dilation;
        std::vector<std::vector<double>> next(static_cast<std::size_t>(cout),
                                              std::vector<double>(static_cast<std::size_t>(T)));
        for (int co = 0; co < cout; ++co) {
            for (int t = 0; t < T; ++t) {
                double acc = spec.b->value.data[static_cast<std::size_t>(co)];
                for (int ci = 0; ci < cin; ++ci) {
                    for (int j = 0; j < k; ++j) {
                        const int src = t + j * spec.dilation - pad;
                        if (src < 0 || src >= T) continue;
                        acc += static_cast<double>(spec.w->value(co, ci, j)) *
                               layer[static_cast<std::size_t>(ci)][static_cast<std::size_t>(src)];
                    }
                }
                next[static_cast<std::size_t>(co)][static_cast<std::size_t>(t)] =
                    spec.relu ? std::max(0.0, acc) : acc;
            }
        }
        layer = std::move(next);
    }

    Tensor logits({10, T});
    for (int c = 0; c < 10; ++c) {
        for (int t = 0; t < T; ++t) {
            logits(c, t) = static_cast<float>(layer[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)]);
        }
    }
    return logits;
}

std::vector<Proposal> generate_proposals_naive(const KindMaps& maps, Kind kind, double thr_ap, int k_dis) {
    const int T = static_cast<int>(maps.ap.size());
    std::vector<int> apex_frames;
    for (int i = 0; i < T; ++i) {
        if (maps.ap[static_cast<std::size_t>(i)] >= thr_ap) apex_frames.push_back(i);
    }
    std::vector<Proposal> out;
    for (int i : apex_frames) {
        const int s_lo = std::max(0, i - k_dis), s_hi = i - 1;
        const int e_lo = i + 1, e_hi = std::min(T - 1, i + k_dis);
        if (s_lo > s_hi || e_lo > e_hi) continue;
        int best_s = -1;
        for (int t = s_lo; t <= s_hi; ++t) {
            if (best_s < 0 || maps.s[static_cast<std::size_t>(t)] > maps.s[static_cast<std::size_t>(best_s)] ||
                (maps.s[static_cast<std::size_t>(t)] == maps.s[static_cast<std::size_t>(best_s)] &&
                 std::abs(i - t) < std::abs(i - best_s))) {
                best_s = t;
            }
        }
        int best_e = -1;
        for (int t = e_lo; t <= e_hi; ++t) {
            if (best_e < 0 || maps.e[static_cast<std::size_t>(t)] > maps.e[static_cast<std::size_t>(best_e)] ||
                (maps.e[static_cast<std::size_t>(t)] == maps.e[static_cast<std::size_t>(best_e)] &&
                 std::abs(i - t) < std::abs(i - best_e))) {
                best_e = t;
            }
        }
        Proposal p;
        p.start = best_s;
        p.end = best_e;
        p.score = static_cast<double>(maps.s[static_cast<std::size_t>(best_s)]) *
                  maps.ap[static_cast<std::size_t>(i)] * maps.e[static_cast<std::size_t>(best_e)];
        p.kind = kind;
        out.push_back(p);
    }
    return out;
}

namespace {

bool ranks_before(const Proposal& a, const Proposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
}

}  // namespace

std::vector<Proposal> nms_naive(const std::vector<Proposal>& proposals, double iou_thr) {
    std::vector<Proposal> remaining = proposals;
    std::vector<Proposal> kept;
    while (!remaining.empty()) {
        std::size_t top = 0;
        for (std::size_t i = 1; i < remaining.size(); ++i) {
            if (ranks_before(remaining[i], remaining[top])) top = i;
        }
        const Proposal best = remaining[top];
        kept.push_back(best);
        std::vector<Proposal> survivors;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            if (i == top) continue;
            if (interval_iou(remaining[i].start, remaining[i].end, best.start, best.end) < iou_thr) {
                survivors.push_back(remaining[i]);
            }
        }
        remaining = std::move(survivors);
    }
    return kept;
}

MatchReport match_naive(const std::vector<Proposal>& proposals,
                        const std::vector<AnnotationInstance>& ground_truths,
                        Kind kind, double k_iou) {
    MatchReport report;
    report.kind = kind;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (proposals[i].kind == kind) todo.push_back(i);
    }
    std::vector<std::size_t> gts;
    for (std::size_t i = 0; i < ground_truths.size(); ++i) {
        if (ground_truths[i].kind == kind) gts.push_back(i);
    }
    std::vector<bool> gt_used(gts.size(), false);
    std::vector<bool> prop_done(todo.size(), false);
    for (std::size_t round = 0; round < todo.size(); ++round) {
        // next proposal by rank, found by scanning
        std::size_t pick = todo.size();
        for (std::size_t i = 0; i < todo.size(); ++i) {
            if (prop_done[i]) continue;
            if (pick == todo.size() || ranks_before(proposals[todo[i]], proposals[todo[pick]])) pick = i;
        }
        prop_done[pick] = true;
        const Proposal& p = proposals[todo[pick]];
        std::size_t best = gts.size();
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_used[g]) continue;
            const auto& gt = ground_truths[gts[g]];
            const double iou = interval_iou(p.start, p.end, gt.onset, gt.offset);
            if (iou > best_iou) {
                best_iou = iou;
                best = g;
            }
        }
        if (best < gts.size() && best_iou >= k_iou) {
            gt_used[best] = true;
            report.tp += 1;
            report.matches.push_back({todo[pick], gts[best], best_iou});
        } else {
            report.fp += 1;
        }
    }
    report.fn = static_cast<long>(gts.size()) - report.tp;
    return report;
}

CountMatrix cooccurrence_naive(const std::vector<AnnotationInstance>& annotations, const AuRoiMap& map) {
    CountMatrix raw{};
    for (const auto& inst : annotations) {
        for (const auto& au_i : inst.aus) {
            const std::vector<int>* rois_i = map.lookup(au_i);
            if (!rois_i) continue;
            for (const auto& au_j : inst.aus) {
                const std::vector<int>* rois_j = map.lookup(au_j);
                if (!rois_j) continue;
                for (int a : *rois_i) {
                    for (int b : *rois_j) {
                        raw[static_cast<std::size_t>(a) * kRoiCount + b] += 1;
                    }
                }
            }
        }
    }
    return raw;
}

double matmul_loss_f64(const Tensor& a, const Tensor& b, const Tensor& w) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(a(i, p)) * b(p, j);
            loss += acc * w(i, j);
        }
    }
    return loss;
}

double relu_loss_f64(const Tensor& x, const Tensor& w) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        loss += std::max(0.0, static_cast<double>(x.data[i])) * w.data[i];
    }
    return loss;
}

double conv1d_loss_f64(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation,
                       const Tensor& w) {
    const int cin = input.dim(0), T = input.dim(1);
    const int cout = weight.dim(0), k = weight.dim(2);
    const int pad = (k - 1) / 2 * dilation;
    double loss = 0.0;
    for (int co = 0; co < cout; ++co) {
        for (int t = 0; t < T; ++t) {
            double acc = bias.data[static_cast<std::size_t>(co)];
            for (int ci = 0; ci < cin; ++ci) {
                for (int j = 0; j < k; ++j) {
                    const int src = t + j * dilation - pad;
                    if (src < 0 || src >= T) continue;
                    acc += static_cast<double>(weight(co, ci, j)) * input(ci, src);
                }
            }
            loss += acc * w(co, t);
        }
    }
    return loss;
}

double sigmoid_loss_f64(const Tensor& x, const Tensor& w) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double v = x.data[i];
        const double p = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
        loss += p * w.data[i];
    }
    return loss;
}

double softmax_loss_f64(const Tensor& x, const Tensor& w) {
    const int C = x.dim(0), T = x.dim(1);
    double loss = 0.0;
    for (int t = 0; t < T; ++t) {
        double mx = x(0, t);
        for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(x(c, t)));
        double sum = 0.0;
        for (int c = 0; c < C; ++c) sum += std::exp(static_cast<double>(x(c, t)) - mx);
        for (int c = 0; c < C; ++c) {
            loss += std::exp(static_cast<double>(x(c, t)) - mx) / sum * w(c, t);
        }
    }
    return loss;
}

double focal_loss_f64(const Tensor& logits, const WindowSample& sample, const TrainConfig& cfg) {
    const int l_w = logits.dim(1);
    const double alpha = cfg.alpha, gamma = cfg.gamma;
    const double inv_valid = 1.0 / sample.valid;
    auto clamp_p = [](double p) { return std::clamp(p, 1e-7, 1.0 - 1e-7); };
    double total = 0.0;
    for (int half = 0; half < 2; ++half) {
        const KindTargets& tg = half == 0 ? sample.macro : sample.micro;
        const int base = half * 5;
        for (int t = 0; t < sample.valid; ++t) {
            const double z = logits(base, t);
            const double p_exp =
                clamp_p(z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)));
            if (tg.exp[static_cast<std::size_t>(t)] != 0) {
                total += -alpha * std::pow(1.0 - p_exp, gamma) * std::log(p_exp) * inv_valid;
            } else {
                total += -(1.0 - alpha) * std::pow(p_exp, gamma) * std::log(1.0 - p_exp) * inv_valid;
            }
            double mx = logits(base + 1, t);
            for (int c = 1; c < 4; ++c) mx = std::max(mx, static_cast<double>(logits(base + 1 + c, t)));
            double sum = 0.0;
            for (int c = 0; c < 4; ++c) sum += std::exp(static_cast<double>(logits(base + 1 + c, t)) - mx);
            const int cls = tg.cls[static_cast<std::size_t>(t)];
            const double pc = clamp_p(std::exp(static_cast<double>(logits(base + 1 + cls, t)) - mx) / sum);
            total += -alpha * std::pow(1.0 - pc, gamma) * std::log(pc) * inv_valid;
        }
    }
    return total;
}

double spectral_radius(const Tensor& m, int iterations) {
    const int n = m.dim(0);
    Rng rng(0xBEEF);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = rng.uniform(0.5, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < iterations; ++it) {
        std::vector<double> next(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) next[static_cast<std::size_t>(i)] += static_cast<double>(m(i, j)) * v[static_cast<std::size_t>(j)];
        }
        double norm = 0.0;
        for (double x : next) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (auto& x : next) x /= norm;
        lambda = norm;
        v = std::move(next);
    }
    return lambda;
}

}  // namespace auwgcn::reference
