#pragma once

#include <string>
#include <vector>

#include "tristage/model.hpp"

namespace tristage {

enum class MapForm { Logits, Probabilities };

// Boundary-emphasis weights: 1 + coef * |local mean of G - G| with a stride-1
// average pool of size `pool` normalizing by the clipped window, so a constant
// target yields weights of exactly 1. Range [1, 1+coef].
Tensor weight_map(const Tensor& target, int64_t pool = 31, double coef = 5.0);

// Weighted BCE + weighted IoU, both under `weights`, averaged over the batch.
// Pass the prediction either as logits or as probabilities (restored canvases
// come as probabilities with exact zeros outside the box).
Tensor hybrid_loss(const Tensor& pred, const Tensor& target, MapForm form, const Tensor& weights);
Tensor hybrid_loss(const Tensor& pred, const Tensor& target, MapForm form = MapForm::Logits);

struct LossOptions {
    int64_t weight_pool = 31;
    double weight_coef = 5.0;
    double edge_gt_threshold = 0.5;
    bool soft_edge_targets = false;     // use the raw derived boundary as target
    bool at_image_resolution = false;   // upsample predictions instead of downsampling targets
};

struct LossTerm {
    std::string name;
    double value;
};

struct LossBreakdown {
    Tensor total;  // scalar, still attached to the graph
    std::vector<LossTerm> terms;
    double total_value() const;
};

// Nearest-downsampled mask target (stays binary).
Tensor mask_target_at(const Tensor& g, int64_t h, int64_t w);
// Boundary target derived from the mask target at its own resolution.
Tensor edge_target_at(const Tensor& g_at_res, const LossOptions& opts);

// Deep supervision over {M1, restored crop maps 3..5, M3} and the boundary
// counterparts: ten terms, summed.
LossBreakdown total_loss(const StageOutputs& so, const Tensor& g, const LossOptions& opts = {});

}  // namespace tristage
