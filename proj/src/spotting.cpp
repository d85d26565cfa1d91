#include "auwgcn/spotting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "auwgcn/evaluation.hpp"

namespace auwgcn {

void SpotConfig::validate() const {
    if (!(thr_ap > 0.0) || thr_ap >= 1.0) throw std::invalid_argument("thr_ap must be in (0, 1)");
    if (!(k_dis_seconds_macro > 0.0) || !(k_dis_seconds_micro > 0.0)) {
        throw std::invalid_argument("k_dis seconds must be positive");
    }
    if (!(nms_iou > 0.0) || nms_iou > 1.0) throw std::invalid_argument("nms_iou must be in (0, 1]");
}

int SpotConfig::k_dis_frames(Kind kind, double fps) const {
    const double seconds = kind == Kind::macro ? k_dis_seconds_macro : k_dis_seconds_micro;
    return std::max(1, static_cast<int>(std::llround(seconds * fps)));
}

std::vector<Proposal> generate_proposals(const KindMaps& maps, Kind kind, double thr_ap, int k_dis) {
    const std::size_t T = maps.ap.size();
    if (maps.s.size() != T || maps.e.size() != T) throw std::invalid_argument("probability sequences differ in length");
    if (!(thr_ap > 0.0) || thr_ap >= 1.0) throw std::invalid_argument("thr_ap must be in (0, 1)");
    if (k_dis < 1) throw std::invalid_argument("k_dis must be >= 1");

    std::vector<Proposal> out;
    const int n = static_cast<int>(T);
    for (int i = 0; i < n; ++i) {
        if (maps.ap[static_cast<std::size_t>(i)] < thr_ap) continue;
        if (i == 0 || i == n - 1) continue;  // empty search range on one side

        // onset: scan away from the apex so ties resolve to the nearest frame
        int best_s = i - 1;
        const int lo = std::max(0, i - k_dis);
        for (int t = i - 1; t >= lo; --t) {
            if (maps.s[static_cast<std::size_t>(t)] > maps.s[static_cast<std::size_t>(best_s)]) best_s = t;
        }
        int best_e = i + 1;
        const int hi = std::min(n - 1, i + k_dis);
        for (int t = i + 1; t <= hi; ++t) {
            if (maps.e[static_cast<std::size_t>(t)] > maps.e[static_cast<std::size_t>(best_e)]) best_e = t;
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

static bool nms_order(const Proposal& a, const Proposal& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.start != b.start) return a.start < b.start;
    return a.end < b.end;
}

std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_thr) {
    if (!(iou_thr > 0.0) || iou_thr > 1.0) throw std::invalid_argument("iou threshold must be in (0, 1]");
    std::sort(proposals.begin(), proposals.end(), nms_order);
    std::vector<Proposal> kept;
    for (const auto& p : proposals) {
        bool suppressed = false;
        for (const auto& k : kept) {
            if (interval_iou(p.start, p.end, k.start, k.end) >= iou_thr) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(p);
    }
    return kept;
}

std::vector<Proposal> spot_video(const ModelParams& params, const Tensor& adjacency,
                                 const FeatureSequence& video, const TrainConfig& train_cfg,
                                 const SpotConfig& spot_cfg) {
    spot_cfg.validate();
    const int T = video.frame_count();

    // inference stitches overlapping half-stride windows by averaging
    TrainConfig win_cfg = train_cfg;
    win_cfg.window_stride_fraction = 0.5;
    const std::vector<WindowSample> windows = make_windows(video, win_cfg);

    KindMaps merged[2];
    for (auto& km : merged) {
        km.exp.assign(static_cast<std::size_t>(T), 0.0f);
        km.s.assign(static_cast<std::size_t>(T), 0.0f);
        km.ap.assign(static_cast<std::size_t>(T), 0.0f);
        km.e.assign(static_cast<std::size_t>(T), 0.0f);
        km.bg.assign(static_cast<std::size_t>(T), 0.0f);
    }
    std::vector<int> cover(static_cast<std::size_t>(T), 0);

    for (const auto& w : windows) {
        const Tensor logits = forward(params, adjacency, w.feats);
        const ProbabilityMaps maps = decode_probabilities(logits);
        for (int t = 0; t < w.valid; ++t) {
            const auto g = static_cast<std::size_t>(w.window_start + t);
            const auto ti = static_cast<std::size_t>(t);
            for (int half = 0; half < 2; ++half) {
                const KindMaps& src = half == 0 ? maps.macro : maps.micro;
                KindMaps& dst = merged[half];
                dst.exp[g] += src.exp[ti];
                dst.s[g] += src.s[ti];
                dst.ap[g] += src.ap[ti];
                dst.e[g] += src.e[ti];
                dst.bg[g] += src.bg[ti];
            }
            cover[g] += 1;
        }
    }
    for (std::size_t g = 0; g < static_cast<std::size_t>(T); ++g) {
        const float inv = cover[g] > 0 ? 1.0f / static_cast<float>(cover[g]) : 0.0f;
        for (auto& km : merged) {
            km.exp[g] *= inv;
            km.s[g] *= inv;
            km.ap[g] *= inv;
            km.e[g] *= inv;
            km.bg[g] *= inv;
        }
    }

    std::vector<Proposal> out;
    for (Kind kind : {Kind::macro, Kind::micro}) {
        const KindMaps& km = merged[kind == Kind::macro ? 0 : 1];
        const int k_dis = spot_cfg.k_dis_frames(kind, video.fps);
        std::vector<Proposal> props = generate_proposals(km, kind, spot_cfg.thr_ap, k_dis);
        props = nms(std::move(props), spot_cfg.nms_iou);
        for (auto& p : props) {
            p.video_id = video.video_id;
            out.push_back(std::move(p));
        }
    }
    std::sort(out.begin(), out.end(), [](const Proposal& a, const Proposal& b) {
        if (a.kind != b.kind) return a.kind == Kind::macro;
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });
    return out;
}

static const char* kProposalHeader = "video_id,kind,start,end,score";

void save_proposals(const std::vector<Proposal>& proposals, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::io_failure, "cannot open " + path + " for writing");
    out << kProposalHeader << "\n";
    char buf[32];
    for (const auto& p : proposals) {
        std::snprintf(buf, sizeof(buf), "%.6f", p.score);
        out << p.video_id << ',' << to_string(p.kind) << ',' << p.start << ',' << p.end << ',' << buf << "\n";
    }
    if (!out) throw IoError(IoErrorKind::io_failure, "write failed for " + path);
}

std::vector<Proposal> load_proposals(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(IoErrorKind::io_failure, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError(IoErrorKind::malformed, path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kProposalHeader) throw IoError(IoErrorKind::malformed, path + ": bad header '" + line + "'");
    std::vector<Proposal> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string vid, kind, start, end, score;
        if (!std::getline(ss, vid, ',') || !std::getline(ss, kind, ',') || !std::getline(ss, start, ',') ||
            !std::getline(ss, end, ',') || !std::getline(ss, score)) {
            throw IoError(IoErrorKind::malformed, path + ":" + std::to_string(lineno) + ": expected 5 columns");
        }
        Proposal p;
        p.video_id = vid;
        try {
            p.kind = kind_from_string(kind);
            p.start = std::stoi(start);
            p.end = std::stoi(end);
            p.score = std::stod(score);
        } catch (const std::exception& e) {
            throw IoError(IoErrorKind::malformed, path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (p.start >= p.end) {
            throw IoError(IoErrorKind::malformed, path + ":" + std::to_string(lineno) + ": start must be < end");
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace auwgcn
