#pragma once

#include "tristage/bem.hpp"
#include "tristage/mfem.hpp"

namespace tristage {

// Split-fusion: the input feature is split channel-wise into groups, each
// group is concatenated with the mask map, fused by a 3x3 conv and refined by
// spatial then channel attention; each group output feeds the next group.
struct SfmImpl : torch::nn::Module {
    SfmImpl(int64_t channels, int64_t groups, int64_t ca_reduction, Norm norm);
    Tensor forward(const Tensor& feature, const Tensor& mask);

    int64_t group_width;
    std::vector<ConvUnit> convs;
    std::vector<SpatialAttention> sas;
    std::vector<ChannelAttention> cas;
};
TORCH_MODULE(Sfm);

// Mask-guided fusion: split-fusion against M2, trunk channel-then-spatial
// attention, a boundary feature refined with E2, a residual merge, and the
// final mask/boundary heads. Consumes the already-enhanced stem feature R2.
struct MgfmOptions {
    int64_t channels = 64;
    int64_t sfm_groups = 4;
    int64_t ca_reduction = 4;
    int64_t edge_feature_channels = 64;
    Norm norm = Norm::None;
    bool without_sfm = false;
    bool without_edge = false;

    explicit MgfmOptions(int64_t c) : channels(c), edge_feature_channels(c) {}
};

struct MgfmImpl : torch::nn::Module {
    explicit MgfmImpl(MgfmOptions opts);

    // r2: (N,C,h,w); m2, e2: (N,1,h,w) in [0,1]. Returns {mask, edge} logits.
    std::pair<Tensor, Tensor> forward(const Tensor& r2, const Tensor& m2, const Tensor& e2,
                                      FeatureTap* tap = nullptr);

    MgfmOptions opts;
    Sfm sfm{nullptr};
    ConvUnit fuse_wo_sfm{nullptr};
    ChannelAttention trunk_ca{nullptr};
    SpatialAttention trunk_sa{nullptr};
    ConvUnit edge_conv1{nullptr}, edge_conv2{nullptr}, res_conv{nullptr};
    torch::nn::Conv2d mask_head{nullptr}, edge_head{nullptr};
};
TORCH_MODULE(Mgfm);

}  // namespace tristage
