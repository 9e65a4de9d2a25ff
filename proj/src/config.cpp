#include "tristage/config.hpp"

namespace tristage {

void BackboneConfig::validate() const {
    if (stage_channels.size() != 5 || stage_blocks.size() != 5)
        throw ConfigError("backbone.stage_channels and backbone.stage_blocks must each have 5 entries");
    for (auto c : stage_channels)
        if (c < 1) throw ConfigError("backbone.stage_channels entries must be >= 1");
    for (auto b : stage_blocks)
        if (b < 1) throw ConfigError("backbone.stage_blocks entries must be >= 1");
    if (stem_stride_total != 4)
        throw ConfigError("backbone.stem_stride_total: only the stride-4 stem plan is supported");
}

ModelConfig ModelConfig::full() { return {}; }

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.input_size = 176;
    c.crop_size = 40;
    c.decoder_channels = 32;
    c.qk_channels = 8;
    c.edge_feature_channels = 32;
    c.norm = Norm::Group;
    c.backbone.stage_channels = {8, 16, 32, 48, 64};
    c.backbone.stage_blocks = {1, 1, 1, 1, 1};
    c.backbone.tiny_profile = true;
    return c;
}

void ModelConfig::validate() const {
    backbone.validate();
    if (input_size < 32 || input_size % 32 != 0)
        throw SizingError("input_size must be >= 32 and divisible by 32, got " +
                          std::to_string(input_size));
    if (crop_size < 8 || crop_size % 8 != 0)
        throw SizingError("crop_size must be >= 8 and divisible by 8, got " +
                          std::to_string(crop_size));
    if (expansion_ratio < 1.0)
        throw ConfigError("expansion_ratio must be >= 1.0, got " + std::to_string(expansion_ratio));
    if (decoder_channels < sfm_groups || decoder_channels % sfm_groups != 0)
        throw ConfigError("decoder_channels (" + std::to_string(decoder_channels) +
                          ") must be divisible by sfm_groups (" + std::to_string(sfm_groups) + ")");
    if (qk_channels > decoder_channels)
        throw ConfigError("qk_channels must not exceed decoder_channels");
    if (mfem_pool_sizes.empty()) throw ConfigError("mfem_pool_sizes must be non-empty");
    for (size_t i = 1; i < mfem_pool_sizes.size(); ++i)
        if (mfem_pool_sizes[i] >= mfem_pool_sizes[i - 1])
            throw ConfigError("mfem_pool_sizes must be strictly decreasing");
    if (mfem_pool_sizes.back() < 1) throw ConfigError("mfem_pool_sizes entries must be >= 1");
    if (ca_reduction < 1) throw ConfigError("ca_reduction must be >= 1");
    if (without_mfem && mfem_parallel)
        throw ConfigError("without_mfem and mfem_parallel are mutually exclusive model variants");
    if (without_bem && without_edge)
        throw ConfigError("without_bem already removes the edge path; without_edge cannot compose with it");
}

}  // namespace tristage
