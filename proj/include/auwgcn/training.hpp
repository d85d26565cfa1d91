#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "auwgcn/au_prior.hpp"
#include "auwgcn/feature_io.hpp"
#include "auwgcn/model.hpp"

namespace auwgcn {

struct TrainConfig {
    double lr = 0.01;
    int epochs = 100;
    double window_seconds = 2.2;
    double window_stride_fraction = 0.5;  // in (0, 1]
    double alpha = 0.75;
    double gamma = 2.0;
    double boundary_radius_seconds = 1.0 / 30.0;
    std::uint64_t seed = 1;

    void validate() const;
};

// frame class ids for the 4-way task, matching the softmax channel order
inline constexpr std::uint8_t kClassOnset = 0;
inline constexpr std::uint8_t kClassApex = 1;
inline constexpr std::uint8_t kClassOffset = 2;
inline constexpr std::uint8_t kClassBackground = 3;

struct KindTargets {
    std::vector<std::uint8_t> exp;  // 1 inside a ground-truth interval
    std::vector<std::uint8_t> cls;  // kClass* above
};

struct WindowSample {
    Tensor feats;  // l_w x 12 x 2, zero-padded past `valid`
    KindTargets macro;
    KindTargets micro;
    std::string video_id;
    int window_start = 0;
    int valid = 0;  // leading frames that carry real data
};

// window length in frames for one video; throws if below the receptive field
int window_length(double fps, const TrainConfig& cfg);

// Sliding windows at stride ceil(l_w * stride_fraction); the last window is
// zero-padded so every frame is covered. Features only; no targets.
std::vector<WindowSample> make_windows(const FeatureSequence& video, const TrainConfig& cfg);

// Fills both kinds' targets of `window` from the video's annotations.
void encode_labels(const std::vector<AnnotationInstance>& annotations, double fps,
                   const TrainConfig& cfg, WindowSample& window);

struct FocalResult {
    double loss = 0.0;
    Tensor dlogits;  // 10 x l_w, zero at padded frames
};

// Focal loss over the binary expression task and the 4-way boundary task for
// both kinds, each averaged over valid frames; returns the gradient with
// respect to the 10 head logits.
FocalResult focal_loss(const ProbabilityMaps& probs, const WindowSample& sample, const TrainConfig& cfg);

// Training windows for one LOSO fold: all videos of subjects other than
// `held_out`, labels attached.
std::vector<WindowSample> build_training_windows(const Dataset& ds, const std::string& held_out,
                                                 const TrainConfig& cfg);

struct FoldResult {
    ModelParams params;
    Tensor adjacency;   // normalized prior built from training subjects only
    double final_loss = 0.0;  // mean over the last 10% of steps
    std::int64_t steps = 0;
};

struct TrainHooks {
    // overrides the prior adjacency when set (used by the uniform-mixing baseline)
    const Tensor* fixed_adjacency = nullptr;
};

FoldResult train_fold(const Dataset& ds, const std::string& held_out, const TrainConfig& cfg,
                      const ModelConfig& model_cfg, const AuRoiMap& map, const TrainHooks& hooks = {});

// One fold per subject; folds are independent and may run on `workers` threads.
std::map<std::string, FoldResult> loso(const Dataset& ds, const TrainConfig& cfg,
                                       const ModelConfig& model_cfg, const AuRoiMap& map,
                                       int workers = 1, const TrainHooks& hooks = {});

}  // namespace auwgcn
