#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tristage/common.hpp"

namespace tristage {

// Bifurcated residual encoder shape: five stages, stage 1 = the 7x7 stem conv,
// stage 2 = the first bottleneck stack, stages 3-5 = the leaf stacks.
struct BackboneConfig {
    std::vector<int64_t> stage_channels{64, 256, 512, 1024, 2048};
    std::vector<int64_t> stage_blocks{1, 3, 4, 6, 3};
    int64_t stem_stride_total = 4;
    bool tiny_profile = false;

    void validate() const;
};

struct ModelConfig {
    int64_t input_size = 704;  // square, multiple of 32
    int64_t crop_size = 120;   // S, multiple of 8
    double expansion_ratio = 1.2;

    int64_t decoder_channels = 64;  // width every enhancement block emits
    int64_t qk_channels = 16;
    std::vector<int64_t> mfem_pool_sizes{8, 4, 2, 1};
    int64_t mfem_dilation = 2;
    int64_t nonlocal_max_positions = 4096;
    int64_t ca_reduction = 4;            // channel-attention perceptron bottleneck ratio
    int64_t sfm_groups = 4;              // split-fusion group count
    int64_t edge_feature_channels = 64;  // boundary-feature width before the edge-map concat

    Norm norm = Norm::Batch;
    BackboneConfig backbone{};

    // Ablation switches; see RunConfig::validate for which combinations compose.
    bool without_mfem = false;
    bool mfem_parallel = false;
    bool without_bem = false;
    bool without_edge = false;
    bool without_sfm = false;

    bool leaves_share_init = true;  // both leaves start from the same reference stages

    static ModelConfig full();
    static ModelConfig tiny();

    void validate() const;
};

}  // namespace tristage
