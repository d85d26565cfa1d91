#include "auwgcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "auwgcn/adam.hpp"
#include "auwgcn/rng.hpp"

namespace auwgcn {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(window_seconds > 0.0)) throw std::invalid_argument("window_seconds must be positive");
    if (!(window_stride_fraction > 0.0) || window_stride_fraction > 1.0) {
        throw std::invalid_argument("window_stride_fraction must be in (0, 1]");
    }
    if (!(alpha > 0.0) || alpha >= 1.0) throw std::invalid_argument("alpha must be in (0, 1)");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be nonnegative");
    if (boundary_radius_seconds < 0.0) throw std::invalid_argument("boundary_radius_seconds must be nonnegative");
}

int window_length(double fps, const TrainConfig& cfg) {
    cfg.validate();
    if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
    const int l_w = static_cast<int>(std::llround(cfg.window_seconds * fps));
    if (l_w < 11) {
        throw std::invalid_argument("window of " + std::to_string(l_w) +
                                    " frames is below the 11-frame receptive field");
    }
    return l_w;
}

std::vector<WindowSample> make_windows(const FeatureSequence& video, const TrainConfig& cfg) {
    const int T = video.frame_count();
    if (T < 1) throw std::invalid_argument("video has no frames");
    const int l_w = window_length(video.fps, cfg);
    const int stride = static_cast<int>(std::ceil(l_w * cfg.window_stride_fraction));

    std::vector<WindowSample> out;
    int start = 0;
    while (true) {
        WindowSample w;
        w.video_id = video.video_id;
        w.window_start = start;
        w.valid = std::min(l_w, T - start);
        w.feats = Tensor({l_w, kRoiCount, kFlowChannels});
        std::memcpy(w.feats.data.data(),
                    &video.frames.data[static_cast<std::size_t>(start) * kRoiCount * kFlowChannels],
                    sizeof(float) * static_cast<std::size_t>(w.valid) * kRoiCount * kFlowChannels);
        out.push_back(std::move(w));
        if (start + l_w >= T) break;
        start += stride;
    }
    return out;
}

void encode_labels(const std::vector<AnnotationInstance>& annotations, double fps,
                   const TrainConfig& cfg, WindowSample& window) {
    const int l_w = window.feats.dim(0);
    const int radius = static_cast<int>(std::llround(cfg.boundary_radius_seconds * fps));
    for (Kind kind : {Kind::macro, Kind::micro}) {
        KindTargets& tg = kind == Kind::macro ? window.macro : window.micro;
        tg.exp.assign(static_cast<std::size_t>(l_w), 0);
        tg.cls.assign(static_cast<std::size_t>(l_w), kClassBackground);
        for (int t = 0; t < l_w; ++t) {
            const int g = window.window_start + t;
            bool is_onset = false, is_apex = false, is_offset = false;
            for (const auto& a : annotations) {
                if (a.kind != kind) continue;
                if (g >= a.onset && g <= a.offset) tg.exp[static_cast<std::size_t>(t)] = 1;
                // short instances shrink the band so onset/apex/offset stay distinct
                const int r = std::min(radius, (a.offset - a.onset) / 4);
                is_onset = is_onset || std::abs(g - a.onset) <= r;
                is_apex = is_apex || std::abs(g - a.apex) <= r;
                is_offset = is_offset || std::abs(g - a.offset) <= r;
            }
            // tie priority: apex > onset > offset
            if (is_apex) {
                tg.cls[static_cast<std::size_t>(t)] = kClassApex;
            } else if (is_onset) {
                tg.cls[static_cast<std::size_t>(t)] = kClassOnset;
            } else if (is_offset) {
                tg.cls[static_cast<std::size_t>(t)] = kClassOffset;
            }
        }
    }
}

namespace {

constexpr double kProbFloor = 1e-7;

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

// binary focal term and its gradient w.r.t. the sigmoid logit
void binary_focal(double p_raw, bool positive, double alpha, double gamma,
                  double& loss, double& dlogit) {
    const double p = clamp_prob(p_raw);
    const double dp_dz = p_raw * (1.0 - p_raw);  // sigmoid derivative at the raw output
    if (positive) {
        const double q = 1.0 - p;
        loss = -alpha * std::pow(q, gamma) * std::log(p);
        const double dl_dp = alpha * (gamma * std::pow(q, gamma - 1.0) * std::log(p) - std::pow(q, gamma) / p);
        dlogit = dl_dp * dp_dz;
    } else {
        loss = -(1.0 - alpha) * std::pow(p, gamma) * std::log(1.0 - p);
        const double dl_dp = -(1.0 - alpha) * (gamma * std::pow(p, gamma - 1.0) * std::log(1.0 - p) -
                                               std::pow(p, gamma) / (1.0 - p));
        dlogit = dl_dp * dp_dz;
    }
}

}  // namespace

FocalResult focal_loss(const ProbabilityMaps& probs, const WindowSample& sample, const TrainConfig& cfg) {
    const int l_w = sample.feats.dim(0);
    if (probs.length != l_w) throw std::invalid_argument("probability maps do not match the window length");
    if (sample.valid < 1 || sample.valid > l_w) throw std::invalid_argument("window valid count out of range");
    const double alpha = cfg.alpha, gamma = cfg.gamma;
    const double inv_valid = 1.0 / sample.valid;

    FocalResult res;
    res.dlogits = Tensor({10, l_w});
    double total = 0.0;
    for (int half = 0; half < 2; ++half) {
        const KindMaps& km = half == 0 ? probs.macro : probs.micro;
        const KindTargets& tg = half == 0 ? sample.macro : sample.micro;
        const int base = half * 5;
        if (tg.exp.size() != static_cast<std::size_t>(l_w) || tg.cls.size() != static_cast<std::size_t>(l_w)) {
            throw std::invalid_argument("window targets missing or mis-sized");
        }
        for (int t = 0; t < sample.valid; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            double loss, dlogit;
            binary_focal(km.exp[ti], tg.exp[ti] != 0, alpha, gamma, loss, dlogit);
            total += loss * inv_valid;
            res.dlogits(base, t) = static_cast<float>(dlogit * inv_valid);

            // 4-way focal at the target class through the softmax
            const double p4[4] = {km.s[ti], km.ap[ti], km.e[ti], km.bg[ti]};
            const int c = tg.cls[ti];
            const double pc = clamp_prob(p4[c]);
            const double q = 1.0 - pc;
            total += -alpha * std::pow(q, gamma) * std::log(pc) * inv_valid;
            const double dl_dpc = alpha * (gamma * std::pow(q, gamma - 1.0) * std::log(pc) - std::pow(q, gamma) / pc);
            for (int k = 0; k < 4; ++k) {
                const double delta = k == c ? 1.0 : 0.0;
                const double dpc_dzk = p4[c] * (delta - p4[k]);
                res.dlogits(base + 1 + k, t) = static_cast<float>(dl_dpc * dpc_dzk * inv_valid);
            }
        }
    }
    res.loss = total;
    check_finite(res.dlogits, "focal_loss");
    return res;
}

std::vector<WindowSample> build_training_windows(const Dataset& ds, const std::string& held_out,
                                                 const TrainConfig& cfg) {
    static const std::vector<AnnotationInstance> kNone;
    std::vector<WindowSample> out;
    for (const auto& video : ds.videos) {
        if (video.subject_id == held_out) continue;
        const auto it = ds.annotations.find(video.video_id);
        const auto& anns = it == ds.annotations.end() ? kNone : it->second;
        for (auto& w : make_windows(video, cfg)) {
            encode_labels(anns, video.fps, cfg, w);
            out.push_back(std::move(w));
        }
    }
    return out;
}

FoldResult train_fold(const Dataset& ds, const std::string& held_out, const TrainConfig& cfg,
                      const ModelConfig& model_cfg, const AuRoiMap& map, const TrainHooks& hooks) {
    cfg.validate();
    const auto subjects = ds.subjects();
    if (!subjects.count(held_out)) throw std::invalid_argument("unknown subject '" + held_out + "'");

    // the prior must only see training-fold annotations
    std::vector<AnnotationInstance> train_anns;
    for (const auto& video : ds.videos) {
        if (video.subject_id == held_out) continue;
        const auto it = ds.annotations.find(video.video_id);
        if (it == ds.annotations.end()) continue;
        train_anns.insert(train_anns.end(), it->second.begin(), it->second.end());
    }

    FoldResult fold;
    fold.adjacency = hooks.fixed_adjacency ? *hooks.fixed_adjacency
                                           : build_adjacency(train_anns, map).normalized;

    std::vector<WindowSample> windows = build_training_windows(ds, held_out, cfg);
    if (windows.empty()) throw std::invalid_argument("no training windows for fold '" + held_out + "'");

    ModelConfig init_cfg = model_cfg;
    init_cfg.init_seed = mix_seed(cfg.seed, fnv1a(held_out));
    fold.params = init_params(init_cfg);

    AdamOptimizer opt(fold.params.all(), cfg.lr);
    Rng shuffle_rng(mix_seed(cfg.seed, fnv1a(held_out) ^ 0x5EEDULL));

    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::int64_t total_steps = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>(windows.size());
    const std::int64_t tail_start = total_steps - std::max<std::int64_t>(1, total_steps / 10);
    double tail_loss = 0.0;
    std::int64_t tail_count = 0;
    std::int64_t step = 0;

    ForwardTape tape;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t oi : order) {
            const WindowSample& w = windows[oi];
            forward(fold.params, fold.adjacency, w.feats, &tape);
            const ProbabilityMaps maps = decode_probabilities(tape.logits);
            FocalResult fr = focal_loss(maps, w, cfg);
            backward(fold.params, tape, fr.dlogits);
            opt.step();
            if (step >= tail_start) {
                tail_loss += fr.loss;
                ++tail_count;
            }
            ++step;
        }
    }
    fold.final_loss = tail_count > 0 ? tail_loss / static_cast<double>(tail_count) : 0.0;
    fold.steps = step;
    return fold;
}

std::map<std::string, FoldResult> loso(const Dataset& ds, const TrainConfig& cfg,
                                       const ModelConfig& model_cfg, const AuRoiMap& map,
                                       int workers, const TrainHooks& hooks) {
    const auto subject_set = ds.subjects();
    if (subject_set.size() < 2) throw std::invalid_argument("LOSO needs at least 2 subjects");
    const std::vector<std::string> subjects(subject_set.begin(), subject_set.end());

    std::map<std::string, FoldResult> out;
    if (workers <= 1) {
        for (const auto& s : subjects) out[s] = train_fold(ds, s, cfg, model_cfg, map, hooks);
        return out;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr error;
    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (error || next >= subjects.size()) return;
                i = next++;
            }
            try {
                FoldResult fold = train_fold(ds, subjects[i], cfg, model_cfg, map, hooks);
                std::lock_guard<std::mutex> lock(mu);
                out[subjects[i]] = std::move(fold);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(subjects.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace auwgcn
