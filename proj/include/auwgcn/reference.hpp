#pragma once

#include <vector>

#include "auwgcn/au_prior.hpp"
#include "auwgcn/evaluation.hpp"
#include "auwgcn/model.hpp"
#include "auwgcn/spotting.hpp"
#include "auwgcn/tensor.hpp"
#include "auwgcn/training.hpp"

// Naive reference implementations for the verification harness and the test
// suites. Each is written directly from the defining rule, independent of the
// production code paths it is compared against, and favors clarity over speed.
namespace auwgcn::reference {

// position-by-position zero-padded convolution
Tensor conv1d_naive(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation);

// whole network re-derived with plain loops, no tape, f64 throughout
Tensor model_forward_naive(const ModelParams& params, const Tensor& adjacency, const Tensor& feats);

// proposal generation straight from the pseudocode, explicit tie handling
std::vector<Proposal> generate_proposals_naive(const KindMaps& maps, Kind kind, double thr_ap, int k_dis);

// NMS by repeated global-max scan instead of sort-then-filter
std::vector<Proposal> nms_naive(const std::vector<Proposal>& proposals, double iou_thr);

// greedy matching re-implemented with linear scans
MatchReport match_naive(const std::vector<Proposal>& proposals,
                        const std::vector<AnnotationInstance>& ground_truths,
                        Kind kind, double k_iou);

// triple loop over (instance, AU pair, ROI pair)
CountMatrix cooccurrence_naive(const std::vector<AnnotationInstance>& annotations, const AuRoiMap& map);

// |lambda|_max of a symmetric matrix by power iteration
double spectral_radius(const Tensor& m, int iterations = 200);

// f64 end-to-end weighted-sum loss evaluators for finite-difference checks;
// they read f32 values but never store f32 intermediates, so the difference
// quotient is free of storage rounding.
double matmul_loss_f64(const Tensor& a, const Tensor& b, const Tensor& w);
double relu_loss_f64(const Tensor& x, const Tensor& w);
double conv1d_loss_f64(const Tensor& input, const Tensor& weight, const Tensor& bias, int dilation,
                       const Tensor& w);
double sigmoid_loss_f64(const Tensor& x, const Tensor& w);
double softmax_loss_f64(const Tensor& x, const Tensor& w);

// probability decoding plus focal loss re-derived in f64 from the logits
double focal_loss_f64(const Tensor& logits, const WindowSample& sample, const TrainConfig& cfg);

}  // namespace auwgcn::reference
