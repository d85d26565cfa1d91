#pragma once

#include <string>
#include <vector>

#include "auwgcn/feature_io.hpp"
#include "auwgcn/kind.hpp"

namespace auwgcn {

struct Proposal;

// IoU of two inclusive frame intervals, |[s,e]| = e - s + 1.
double interval_iou(int s1, int e1, int s2, int e2);

struct MatchPair {
    std::size_t proposal_index = 0;
    std::size_t ground_truth_index = 0;
    double iou = 0.0;
};

struct MatchReport {
    Kind kind = Kind::macro;
    long tp = 0;
    long fp = 0;
    long fn = 0;
    std::vector<MatchPair> matches;
};

// Greedy one-to-one matching: proposals by descending score, each claiming
// the unclaimed ground truth with the highest IoU when that IoU >= k_iou.
MatchReport match(const std::vector<Proposal>& proposals,
                  const std::vector<AnnotationInstance>& ground_truths,
                  Kind kind, double k_iou = 0.5);

struct KindScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long tp = 0;
    long fp = 0;
    long fn = 0;
};

struct ScoreSummary {
    KindScore macro;
    KindScore micro;
    KindScore overall;
};

// Pools raw counts across videos and folds per kind; overall pools both kinds.
ScoreSummary summarize(const std::vector<MatchReport>& reports);

// key=value score table, one metric per line
void save_scores(const ScoreSummary& summary, const std::string& path);
std::string format_scores(const ScoreSummary& summary);

}  // namespace auwgcn
