#pragma once

#include <string>
#include <vector>

#include "auwgcn/feature_io.hpp"
#include "auwgcn/model.hpp"
#include "auwgcn/training.hpp"

namespace auwgcn {

struct Proposal {
    int start = 0;
    int end = 0;
    double score = 0.0;  // p_s[start] * p_ap[apex] * p_e[end]
    Kind kind = Kind::macro;
    std::string video_id;
};

struct SpotConfig {
    double thr_ap = 0.4;
    double k_dis_seconds_macro = 2.0;
    double k_dis_seconds_micro = 0.25;
    double nms_iou = 0.5;

    void validate() const;
    int k_dis_frames(Kind kind, double fps) const;
};

// For every frame i with p_ap[i] >= thr_ap, picks the best onset in
// [i-k_dis, i-1] and the best offset in [i+1, i+k_dis] (clipped to the
// sequence, argmax ties toward the frame nearest the apex) and scores the
// triple. Apexes at the sequence ends have an empty search range and are
// skipped.
std::vector<Proposal> generate_proposals(const KindMaps& maps, Kind kind, double thr_ap, int k_dis);

// Greedy NMS: keep by descending score (ties: earlier start, then shorter),
// drop anything with IoU >= iou_thr against a kept proposal.
std::vector<Proposal> nms(std::vector<Proposal> proposals, double iou_thr);

// Windows the video at stride l_w/2, averages decoded probabilities over
// overlapping windows, then runs proposal generation + NMS per kind.
std::vector<Proposal> spot_video(const ModelParams& params, const Tensor& adjacency,
                                 const FeatureSequence& video, const TrainConfig& train_cfg,
                                 const SpotConfig& spot_cfg);

// Proposal CSV: video_id,kind,start,end,score with scores to 6 decimals.
void save_proposals(const std::vector<Proposal>& proposals, const std::string& path);
std::vector<Proposal> load_proposals(const std::string& path);

}  // namespace auwgcn
