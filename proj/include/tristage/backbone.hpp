#pragma once

#include <array>

#include "tristage/config.hpp"

namespace tristage {

// Bottleneck residual block, 4x expansion, torchvision-compatible child names
// so reference checkpoints map directly.
struct BottleneckImpl : torch::nn::Module {
    BottleneckImpl(int64_t in, int64_t out, int64_t stride, Norm norm_kind);
    Tensor forward(const Tensor& x);

    torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
    torch::nn::AnyModule bn1, bn2, bn3;
    torch::nn::Conv2d ds_conv{nullptr};
    torch::nn::AnyModule ds_norm;
    bool has_downsample = false;
};
TORCH_MODULE(Bottleneck);

// Shared stem: 7x7 stride-2 conv (stage 1) + 3x3 stride-2 max pool + first
// bottleneck stack (stage 2). The stage-1 feature is computed and dropped.
struct StemImpl : torch::nn::Module {
    explicit StemImpl(const BackboneConfig& cfg, Norm norm_kind);
    // image (N,3,H,W), H and W >= 32 and divisible by 32 -> f2 at (H/4, W/4)
    Tensor forward(const Tensor& image);

    torch::nn::Conv2d conv1{nullptr};
    torch::nn::AnyModule bn1;
    torch::nn::Sequential layer1;
};
TORCH_MODULE(Stem);

struct LeafOutput {
    Tensor f3, f4, f5;
};

// Stages 3-5; the two leaves are structurally identical and independently
// parameterized.
struct LeafImpl : torch::nn::Module {
    explicit LeafImpl(const BackboneConfig& cfg, Norm norm_kind);
    LeafOutput forward(const Tensor& x);

    torch::nn::Sequential layer2, layer3, layer4;
};
TORCH_MODULE(Leaf);

// First-leaf path: 2x2 ceil-mode max pool, then the leaf. f2 must be >= 8x8.
LeafOutput pool_then_leaf(Leaf& leaf, const Tensor& f2);

// Second-leaf path: no extra pool; the side length must be divisible by 8.
LeafOutput leaf2_forward(Leaf& leaf, const Tensor& cropped);

// Standalone aggregation of the three branches (the full pipeline registers
// stem/leaf1/leaf2 itself so checkpoint keys stay flat).
struct BifurcatedBackboneImpl : torch::nn::Module {
    explicit BifurcatedBackboneImpl(const BackboneConfig& cfg, Norm norm_kind);
    Stem stem{nullptr};
    Leaf leaf1{nullptr}, leaf2{nullptr};
};
TORCH_MODULE(BifurcatedBackbone);

// Resolution plan: stage i<=2 features sit at ceil(H/2^i), stages 3-5 on the
// first-leaf path at ceil(H/2^(i+1)); the crop path halves S three times.
int64_t halved(int64_t v, int64_t times);

}  // namespace tristage
