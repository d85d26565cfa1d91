#include "auwgcn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "auwgcn/spotting.hpp"

namespace auwgcn {

double interval_iou(int s1, int e1, int s2, int e2) {
    if (s1 > e1 || s2 > e2) throw std::invalid_argument("malformed interval");
    const long inter = std::max(0L, static_cast<long>(std::min(e1, e2)) - std::max(s1, s2) + 1);
    const long uni = (static_cast<long>(e1) - s1 + 1) + (static_cast<long>(e2) - s2 + 1) - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

MatchReport match(const std::vector<Proposal>& proposals,
                  const std::vector<AnnotationInstance>& ground_truths,
                  Kind kind, double k_iou) {
    MatchReport report;
    report.kind = kind;

    std::vector<std::size_t> prop_idx;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        if (proposals[i].kind == kind) prop_idx.push_back(i);
    }
    std::vector<std::size_t> gt_idx;
    for (std::size_t i = 0; i < ground_truths.size(); ++i) {
        if (ground_truths[i].kind == kind) gt_idx.push_back(i);
    }

    std::sort(prop_idx.begin(), prop_idx.end(), [&](std::size_t a, std::size_t b) {
        const Proposal& pa = proposals[a];
        const Proposal& pb = proposals[b];
        if (pa.score != pb.score) return pa.score > pb.score;
        if (pa.start != pb.start) return pa.start < pb.start;
        return pa.end < pb.end;
    });

    std::vector<bool> claimed(gt_idx.size(), false);
    for (std::size_t pi : prop_idx) {
        const Proposal& p = proposals[pi];
        double best_iou = 0.0;
        std::size_t best = gt_idx.size();  // none
        for (std::size_t gi = 0; gi < gt_idx.size(); ++gi) {
            if (claimed[gi]) continue;
            const AnnotationInstance& g = ground_truths[gt_idx[gi]];
            const double iou = interval_iou(p.start, p.end, g.onset, g.offset);
            if (iou <= 0.0) continue;
            // equal IoU resolves to the earlier ground truth
            if (best == gt_idx.size() || iou > best_iou) {
                best_iou = iou;
                best = gi;
            }
        }
        if (best < gt_idx.size() && best_iou >= k_iou) {
            claimed[best] = true;
            report.tp += 1;
            report.matches.push_back({pi, gt_idx[best], best_iou});
        } else {
            report.fp += 1;
        }
    }
    report.fn = static_cast<long>(gt_idx.size()) - report.tp;
    return report;
}

static KindScore finish(long tp, long fp, long fn) {
    KindScore s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

ScoreSummary summarize(const std::vector<MatchReport>& reports) {
    long tp[2] = {0, 0}, fp[2] = {0, 0}, fn[2] = {0, 0};
    for (const auto& r : reports) {
        const int k = r.kind == Kind::macro ? 0 : 1;
        tp[k] += r.tp;
        fp[k] += r.fp;
        fn[k] += r.fn;
    }
    ScoreSummary out;
    out.macro = finish(tp[0], fp[0], fn[0]);
    out.micro = finish(tp[1], fp[1], fn[1]);
    out.overall = finish(tp[0] + tp[1], fp[0] + fp[1], fn[0] + fn[1]);
    return out;
}

static void emit(std::ostream& os, const char* name, const KindScore& s) {
    os << name << ".tp=" << s.tp << "\n";
    os << name << ".fp=" << s.fp << "\n";
    os << name << ".fn=" << s.fn << "\n";
    os << name << ".precision=" << s.precision << "\n";
    os << name << ".recall=" << s.recall << "\n";
    os << name << ".f1=" << s.f1 << "\n";
}

std::string format_scores(const ScoreSummary& summary) {
    std::ostringstream os;
    os.precision(6);
    os << std::fixed;
    emit(os, "macro", summary.macro);
    emit(os, "micro", summary.micro);
    emit(os, "overall", summary.overall);
    return os.str();
}

void save_scores(const ScoreSummary& summary, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::io_failure, "cannot open " + path + " for writing");
    out << format_scores(summary);
    if (!out) throw IoError(IoErrorKind::io_failure, "write failed for " + path);
}

}  // namespace auwgcn
