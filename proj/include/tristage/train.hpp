#pragma once

#include <functional>

#include "tristage/data.hpp"
#include "tristage/loss.hpp"
#include "tristage/model.hpp"

namespace tristage {

struct TrainOptions {
    double lr = 2e-5;
    double poly_power = 0.9;
    int64_t batch_size = 8;
    int64_t epochs = 120;
    int64_t max_steps = -1;  // caps total iterations when positive
    uint64_t seed = 7;
    int64_t workers = 2;
    bool augment = true;
    AugmentConfig aug{};
    LossOptions loss{};
    std::string out_dir;
    int64_t checkpoint_every_epochs = 10;
    std::string resume_from;  // checkpoint path

    // Optional in-training evaluation hook: called every eval_every steps with
    // the live model; returning a value >= stop_at_score ends training.
    int64_t eval_every = 0;
    double stop_at_score = -1.0;
    std::function<double(TriStageNet&)> eval_fn;
};

struct TrainResult {
    int64_t steps = 0;
    double last_loss = 0.0;
    double best_score = -1.0;
    std::string final_checkpoint;
};

// Poly schedule: lr = base * (1 - iter/max_iter)^power, stepped every batch.
double poly_lr(double base, int64_t iter, int64_t max_iter, double power);

TrainResult train_model(TriStageNet& model, const Dataset& data, const TrainOptions& opts);

// Trainer state round-trip (parameters + optimizer moments + RNG + step).
void save_training_checkpoint(const std::string& path, TriStageNet& model,
                              torch::optim::Adam& opt, int64_t step);
int64_t load_training_checkpoint(const std::string& path, TriStageNet& model,
                                 torch::optim::Adam* opt);

}  // namespace tristage
