#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "auwgcn/tensor.hpp"

namespace auwgcn {

// Backbone: per-frame GCN over the 12 ROI nodes (node features = 2 flow
// channels), flattened. Neck: two 1-d convs. Head: one 1-d conv emitting
// 10 channels per frame, 5 per expression kind.
struct ModelConfig {
    int gcn_layers = 1;
    std::vector<int> gcn_hidden = {16};
    std::array<int, 2> neck_channels = {64, 64};
    int head_channels = 10;
    int kernel = 3;
    std::array<int, 3> dilations = {1, 2, 2};
    std::uint64_t init_seed = 1;

    int node_count() const { return 12; }
    int input_dim() const { return 2; }
    int flatten_dim() const { return node_count() * gcn_hidden.back(); }
    void validate() const;
};

struct ModelParams {
    ModelConfig cfg;
    std::vector<Parameter> gcn_w;  // layer l: d_{l-1} x d_l
    Parameter conv1_w, conv1_b;
    Parameter conv2_w, conv2_b;
    Parameter conv3_w, conv3_b;

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t total_params() const;
    void zero_grads();
};

// Glorot-uniform weights, zero biases, deterministic in cfg.init_seed.
ModelParams init_params(const ModelConfig& cfg);

// Intermediate activations recorded by forward() for the fixed-graph backward.
struct ForwardTape {
    Tensor adjacency;                // 12 x 12
    std::vector<Tensor> gcn_in;      // per layer: T x 12 x d_in
    std::vector<Tensor> gcn_ax;      // per layer: T x 12 x d_in  (A * X)
    std::vector<Tensor> gcn_pre;     // per layer: T x 12 x d_out (pre-relu)
    Tensor flat;                     // F x T
    Tensor conv1_pre, conv1_out;
    Tensor conv2_pre, conv2_out;
    Tensor logits;                   // 10 x T
};

// Per-frame GCN embedding: X^l = relu(A X^{l-1} W^{l-1}) for each frame.
// Returns T x 12 x d_last.
Tensor gcn_embed(const ModelParams& params, const Tensor& adjacency, const Tensor& feats);

// feats: T x 12 x 2 -> logits 10 x T. Pass a tape to enable backward().
Tensor forward(const ModelParams& params, const Tensor& adjacency, const Tensor& feats,
               ForwardTape* tape = nullptr);

// Accumulates d(loss)/d(param) into Parameter.grad for upstream = d(loss)/d(logits).
void backward(ModelParams& params, const ForwardTape& tape, const Tensor& upstream);

// Hash of every relu pre-activation sign on the tape. Finite-difference
// checks compare signatures at the two perturbed points and skip coordinates
// whose interval straddles a kink.
std::uint64_t relu_signature(const ForwardTape& tape);

struct KindMaps {
    std::vector<float> exp;  // sigmoid expression probability
    std::vector<float> s, ap, e, bg;  // 4-way softmax: onset, apex, offset, background
};

struct ProbabilityMaps {
    KindMaps macro;
    KindMaps micro;
    int length = 0;
};

// Channel layout: 0 macro exp; 1..4 macro onset/apex/offset/background;
// 5 micro exp; 6..9 micro onset/apex/offset/background.
ProbabilityMaps decode_probabilities(const Tensor& logits);

// Checkpoint: magic "AUWC", u16 version, config block, then every parameter
// tensor in declaration order as f32 little-endian with a shape header.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace auwgcn
