#pragma once

#include "tristage/config.hpp"

namespace tristage {

// sigma(2-layer perceptron(global average pool)) per channel, values in (0,1).
// The perceptron is a pair of 1x1 convs on the pooled (N,C,1,1) vector.
struct ChannelAttentionImpl : torch::nn::Module {
    ChannelAttentionImpl(int64_t channels, int64_t reduction);
    Tensor forward(const Tensor& f);  // (N,C,1,1)

    torch::nn::Conv2d fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(ChannelAttention);

// sigma(7x7 conv(mean over channels)), one map in (0,1) per sample.
struct SpatialAttentionImpl : torch::nn::Module {
    SpatialAttentionImpl();
    Tensor forward(const Tensor& f);  // (N,1,h,w)

    torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(SpatialAttention);

// Boundary enhancement: concat the edge map onto f_low (+ f_high when present),
// fuse with a 3x3 conv, refine with channel then spatial attention, and emit
// mask logits, edge logits and the refined feature.
struct BemOptions {
    int64_t channels = 64;
    int64_t ca_reduction = 4;
    Norm norm = Norm::None;
    bool edge_concat = true;    // false under the no-edge variant
    bool single_conv = false;   // true replaces the fusion body with one 3x3 conv

    explicit BemOptions(int64_t c) : channels(c) {}
    BemOptions& with_reduction(int64_t r) { ca_reduction = r; return *this; }
    BemOptions& with_norm(Norm n) { norm = n; return *this; }
    BemOptions& with_edge_concat(bool e) { edge_concat = e; return *this; }
    BemOptions& with_single_conv(bool s) { single_conv = s; return *this; }
};

struct BemOutput {
    Tensor mask_logits;   // (N,1,h,w)
    Tensor edge_logits;   // (N,1,h,w)
    Tensor refined;       // (N,C,h,w)
};

struct BemImpl : torch::nn::Module {
    explicit BemImpl(BemOptions opts);

    // f_high is absent at the deepest level; edge_in must share the feature
    // resolution and lie in [0,1].
    BemOutput forward(const Tensor& f_low, const c10::optional<Tensor>& f_high,
                      const Tensor& edge_in);

    BemOptions opts;
    ConvUnit fuse{nullptr};
    ChannelAttention ca{nullptr};
    SpatialAttention sa{nullptr};
    ConvUnit mask1{nullptr}, mask2{nullptr};
    torch::nn::Conv2d mask3{nullptr}, edge_head{nullptr};
};
TORCH_MODULE(Bem);

}  // namespace tristage
