#pragma once

#include <array>
#include <vector>

#include "tristage/backbone.hpp"
#include "tristage/bem.hpp"
#include "tristage/geometry.hpp"
#include "tristage/mfem.hpp"
#include "tristage/mgfm.hpp"

namespace tristage {

// Everything one forward pass produces. Mask/boundary logits stay at their
// native resolutions; use emitted()/stage_prob() for image-resolution maps.
struct StageOutputs {
    Tensor m1, e1;              // coarse logits / derived boundary, (N,1,H/16,W/16)
    Tensor m1n, e1n;            // min-max normalized, in [0,1]
    Tensor m1b, e1b;            // binary {0,1}
    std::vector<BBox> boxes;    // per-sample, in stem-feature coordinates
    std::vector<bool> empty_fallback;
    std::array<Tensor, 3> cm, ce;  // crop-decoder logits, index 0..2 = levels 3..5
    Tensor m2, e2;              // restored canvases in [0,1], zero outside the box
    Tensor m3, e3;              // final logits at (N,1,H/4,W/4)
    int64_t input_h = 0, input_w = 0;

    Tensor emitted(const Tensor& map) const { return upsample_bilinear(map, input_h, input_w); }
    // Image-resolution probability map of the requested decoder (1..3).
    Tensor stage_prob(int decoder) const;
};

// Per-level 1x1 transitions that make the first decoder's element-wise sums
// well-typed, plus the coarse prediction head.
struct Dec1HeadImpl : torch::nn::Module {
    Dec1HeadImpl(const BackboneConfig& bb, int64_t channels, Norm norm);
    ConvUnit t3{nullptr}, t4{nullptr}, t5{nullptr};
    torch::nn::Conv2d m1_head{nullptr};
};
TORCH_MODULE(Dec1Head);

struct MfemTrioImpl : torch::nn::Module {
    MfemTrioImpl(MfemOptions l3o, MfemOptions l4o, MfemOptions l5o);
    Mfem l3{nullptr}, l4{nullptr}, l5{nullptr};
};
TORCH_MODULE(MfemTrio);

struct MfemMonoImpl : torch::nn::Module {
    explicit MfemMonoImpl(MfemOptions o);
    Mfem l2{nullptr};
};
TORCH_MODULE(MfemMono);

struct MfemBankImpl : torch::nn::Module {
    explicit MfemBankImpl(const ModelConfig& cfg);
    MfemTrio dec1{nullptr}, dec2{nullptr};
    MfemMono dec3{nullptr};
};
TORCH_MODULE(MfemBank);

struct BemBankImpl : torch::nn::Module {
    explicit BemBankImpl(const ModelConfig& cfg);
    Bem l3{nullptr}, l4{nullptr}, l5{nullptr};
};
TORCH_MODULE(BemBank);

struct Dec2Output {
    std::array<Tensor, 3> cm, ce;  // logits, index 0..2 = levels 3..5
    Tensor refined3;
};

struct TriStageNetImpl : torch::nn::Module {
    explicit TriStageNetImpl(ModelConfig cfg);

    StageOutputs forward(const Tensor& image, FeatureTap* tap = nullptr);

    // First decoder: U-chain of enhanced features; returns M1 logits, the
    // derived boundary map and the fused top feature r3.
    std::tuple<Tensor, Tensor, Tensor> decoder1(const LeafOutput& lo);

    // Second decoder over the crop-path features; ce_crop is the cropped
    // normalized boundary map resized to the deepest level's resolution.
    Dec2Output decoder2(const LeafOutput& lo, const Tensor& ce_crop, FeatureTap* tap = nullptr);

    ModelConfig cfg;
    Stem stem{nullptr};
    Leaf leaf1{nullptr}, leaf2{nullptr};
    MfemBank mfem{nullptr};
    Dec1Head dec1{nullptr};
    BemBank bem{nullptr};
    Mgfm mgfm{nullptr};
};
TORCH_MODULE(TriStageNet);

}  // namespace tristage
