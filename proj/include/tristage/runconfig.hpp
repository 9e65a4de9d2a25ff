#pragma once

#include <map>
#include <string>

#include "tristage/config.hpp"
#include "tristage/data.hpp"
#include "tristage/loss.hpp"

namespace tristage {

// Flat operator-facing configuration; every field round-trips through the
// key=value file form losslessly.
struct RunConfig {
    std::string profile = "full";  // full | tiny
    int64_t input_size = -1;       // -1: profile default
    int64_t crop_size = -1;
    double expansion_ratio = 1.2;
    std::string norm;  // empty: profile default (batch for full, group for tiny)

    // optimizer / schedule
    double lr = 2e-5;
    double poly_power = 0.9;
    int64_t batch_size = 8;
    int64_t epochs = 120;
    int64_t max_steps = -1;
    uint64_t seed = 7;

    // data
    std::string train_data;  // comma-separated roots or synthetic:...
    std::string eval_data;
    std::string out_dir = "runs/default";
    int64_t workers = 2;
    int64_t threads = 0;  // 0: leave torch default
    bool augment = true;
    double aug_rotate_deg = 15.0;
    double aug_border_clip = 0.10;

    // loss
    bool loss_at_image_resolution = false;
    bool soft_edge_targets = false;
    double edge_gt_threshold = 0.5;

    // ablation switches
    bool without_mfem = false;
    bool mfem_parallel = false;
    bool without_bem = false;
    bool without_edge = false;
    bool without_sfm = false;

    // checkpointing
    std::string checkpoint;            // load path
    std::string reference_backbone;    // torchvision-style export to init from
    int64_t checkpoint_every = 10;     // epochs
    bool pretrained_shared_leaves = true;

    std::map<std::string, std::string> to_kv() const;
    static RunConfig from_kv(const std::map<std::string, std::string>& kv);
    void save(const std::string& path) const;
    static RunConfig load(const std::string& path);

    // Rejects switch combinations that no reported variant composes.
    void validate() const;

    ModelConfig model_config() const;
    LossOptions loss_options() const;
    AugmentConfig augment_config() const;
};

}  // namespace tristage
