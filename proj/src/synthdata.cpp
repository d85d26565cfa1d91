#include "auwgcn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "auwgcn/rng.hpp"

namespace auwgcn {

void SynthConfig::validate() const {
    if (subjects < 1) throw std::invalid_argument("subjects must be >= 1");
    if (videos_per_subject < 1) throw std::invalid_argument("videos_per_subject must be >= 1");
    if (!(fps > 0.0)) throw std::invalid_argument("fps must be positive");
    if (!(video_seconds > 0.0)) throw std::invalid_argument("video_seconds must be positive");
    if (macro_rate < 0.0 || micro_rate < 0.0) throw std::invalid_argument("rates must be nonnegative");
    if (!(noise_sigma > 0.0)) throw std::invalid_argument("noise_sigma must be positive");
    if (!(signal_amp > 3.0 * noise_sigma)) {
        throw std::invalid_argument("signal_amp must exceed 3 * noise_sigma");
    }
    if (gap_seconds < 0.5) throw std::invalid_argument("gap_seconds must be at least 0.5");
}

namespace {

// Expressions are AU combinations spanning several ROIs each. Macro
// templates favor lower-face actions (smiles, lip movements), micro
// templates the brow/eye region where suppressed expressions concentrate.
const std::vector<std::vector<std::string>>& au_templates(Kind kind) {
    static const std::vector<std::vector<std::string>> macro_templates = {
        {"AU6", "AU12"},
        {"AU12", "AU15", "AU17"},
        {"AU9", "AU10"},
        {"AU6", "AU10", "AU12"},
    };
    static const std::vector<std::vector<std::string>> micro_templates = {
        {"AU1", "AU2"},
        {"AU4", "AU7"},
        {"AU4", "AU9"},
        {"AU1", "AU2", "AU4"},
    };
    return kind == Kind::macro ? macro_templates : micro_templates;
}

struct PlannedInstance {
    Kind kind;
    int duration;  // frames, offset - onset + 1
    int onset = 0;
    int apex = 0;
    int offset = 0;
    std::size_t template_index = 0;
};

int expected_count(double rate, Rng& rng) {
    int n = static_cast<int>(std::floor(rate));
    const double frac = rate - std::floor(rate);
    if (frac > 0.0 && rng.uniform() < frac) ++n;
    return n;
}

}  // namespace

Dataset generate_dataset(const SynthConfig& cfg) { return generate_dataset(cfg, default_au_roi_map()); }

Dataset generate_dataset(const SynthConfig& cfg, const AuRoiMap& map) {
    cfg.validate();
    map.validate();

    const int T = std::max(1, static_cast<int>(std::llround(cfg.fps * cfg.video_seconds)));
    const int gap = static_cast<int>(std::ceil(cfg.gap_seconds * cfg.fps));
    // Durations are drawn from the central part of each legal range: typical
    // expressions cluster mid-range, and the extremes (a 4 s macro ramp, a
    // 3-frame micro) carry almost no per-frame evidence. The duration laws
    // (macro in [0.5 s, 4.0 s], micro < 0.5 s) still bound the draws.
    const int macro_min = std::max(static_cast<int>(std::ceil(0.5 * cfg.fps)),
                                   static_cast<int>(std::llround(0.6 * cfg.fps)));
    const int macro_max = std::min(static_cast<int>(std::floor(4.0 * cfg.fps)),
                                   static_cast<int>(std::llround(2.5 * cfg.fps)));
    const int micro_cap = static_cast<int>(std::ceil(0.5 * cfg.fps)) - 1;  // (d / fps) < 0.5
    const int micro_max = std::min(micro_cap, static_cast<int>(std::llround(0.45 * cfg.fps)));
    const int micro_min = std::max(3, std::min(micro_max, static_cast<int>(std::llround(0.17 * cfg.fps))));
    if (cfg.micro_rate > 0.0 && micro_max < micro_min) {
        throw std::invalid_argument("fps too low to represent micro-expression durations");
    }

    Dataset ds;
    std::uint64_t video_ordinal = 0;
    for (int s = 0; s < cfg.subjects; ++s) {
        const std::string subject_id = "s" + std::to_string(s + 1);
        for (int v = 0; v < cfg.videos_per_subject; ++v, ++video_ordinal) {
            const std::string video_id = subject_id + "v" + std::to_string(v + 1);
            Rng rng(mix_seed(cfg.seed, video_ordinal));

            FeatureSequence seq;
            seq.subject_id = subject_id;
            seq.video_id = video_id;
            seq.fps = static_cast<float>(cfg.fps);
            seq.frames = Tensor({T, kRoiCount, kFlowChannels});
            // background noise first so the field is independent of the plan
            for (auto& x : seq.frames.data) {
                x = static_cast<float>(rng.gaussian() * cfg.noise_sigma);
            }

            std::vector<PlannedInstance> plan;
            const int n_macro = cfg.macro_rate > 0.0 ? expected_count(cfg.macro_rate, rng) : 0;
            const int n_micro = cfg.micro_rate > 0.0 ? expected_count(cfg.micro_rate, rng) : 0;
            for (int i = 0; i < n_macro; ++i) {
                plan.push_back({Kind::macro,
                                static_cast<int>(rng.uniform_int(macro_min, macro_max)), 0, 0, 0, 0});
            }
            for (int i = 0; i < n_micro; ++i) {
                plan.push_back({Kind::micro,
                                static_cast<int>(rng.uniform_int(micro_min, micro_max)), 0, 0, 0, 0});
            }
            rng.shuffle(plan);

            if (!plan.empty()) {
                std::int64_t occupied = 0;
                for (const auto& p : plan) occupied += p.duration;
                occupied += static_cast<std::int64_t>(gap) * (static_cast<std::int64_t>(plan.size()) - 1);
                if (occupied > T) {
                    throw std::runtime_error("infeasible packing: video " + video_id + " needs " +
                                             std::to_string(occupied) + " frames, has " + std::to_string(T));
                }
                // spread the leftover frames as random slack before/between/after
                const std::int64_t free_frames = T - occupied;
                std::vector<double> weights(plan.size() + 1);
                double wsum = 0.0;
                for (auto& w : weights) {
                    w = rng.uniform();
                    wsum += w;
                }
                std::vector<int> slack(weights.size(), 0);
                std::int64_t assigned = 0;
                for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
                    slack[i] = wsum > 0.0
                                   ? static_cast<int>(std::floor(static_cast<double>(free_frames) * weights[i] / wsum))
                                   : 0;
                    assigned += slack[i];
                }
                slack.back() = static_cast<int>(free_frames - assigned);

                int cursor = 0;
                for (std::size_t i = 0; i < plan.size(); ++i) {
                    cursor += slack[i];
                    auto& p = plan[i];
                    p.onset = cursor;
                    p.offset = cursor + p.duration - 1;
                    // apex uniform in the middle 60% of the interval, strictly interior
                    const double u = rng.uniform(0.2, 0.8);
                    const int rel = static_cast<int>(std::llround(u * (p.duration - 1)));
                    p.apex = p.onset + std::clamp(rel, 1, p.duration - 2);
                    p.template_index = static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<std::int64_t>(au_templates(p.kind).size()) - 1));
                    cursor = p.offset + 1 + gap;
                }
            }

            for (const auto& p : plan) {
                const auto& aus = au_templates(p.kind)[p.template_index];
                std::vector<int> rois;
                for (const auto& au : aus) {
                    const std::vector<int>* mapped = map.lookup(au);
                    if (!mapped) throw std::invalid_argument("AU template entry " + au + " missing from ROI map");
                    rois.insert(rois.end(), mapped->begin(), mapped->end());
                }
                std::sort(rois.begin(), rois.end());
                rois.erase(std::unique(rois.begin(), rois.end()), rois.end());

                // one fixed flow direction per ROI, shared by every instance;
                // facial regions move in characteristic directions
                std::vector<std::pair<double, double>> dirs;
                dirs.reserve(rois.size());
                for (std::size_t i = 0; i < rois.size(); ++i) {
                    const double angle = 2.0 * M_PI * 0.618033988749895 * (rois[i] + 1);
                    dirs.emplace_back(std::cos(angle), std::sin(angle));
                }
                for (int t = p.onset; t <= p.offset; ++t) {
                    const double ramp = t <= p.apex
                                            ? static_cast<double>(t - p.onset) / (p.apex - p.onset)
                                            : static_cast<double>(p.offset - t) / (p.offset - p.apex);
                    const double mag = cfg.signal_amp * ramp;
                    for (std::size_t i = 0; i < rois.size(); ++i) {
                        seq.frames(t, rois[i], 0) += static_cast<float>(mag * dirs[i].first);
                        seq.frames(t, rois[i], 1) += static_cast<float>(mag * dirs[i].second);
                    }
                }

                AnnotationInstance inst;
                inst.onset = p.onset;
                inst.apex = p.apex;
                inst.offset = p.offset;
                inst.kind = p.kind;
                inst.aus = aus;
                std::sort(inst.aus.begin(), inst.aus.end());
                ds.annotations[video_id].push_back(std::move(inst));
            }
            // stable annotation order within a video
            std::sort(ds.annotations[video_id].begin(), ds.annotations[video_id].end(),
                      [](const AnnotationInstance& a, const AnnotationInstance& b) { return a.onset < b.onset; });
            if (ds.annotations[video_id].empty()) ds.annotations.erase(video_id);

            check_finite(seq.frames, "generate_dataset");
            ds.videos.push_back(std::move(seq));
        }
    }
    return ds;
}

}  // namespace auwgcn
