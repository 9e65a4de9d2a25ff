#include "tristage/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tristage/checkpoint.hpp"

namespace fs = std::filesystem;

namespace tristage {

double poly_lr(double base, int64_t iter, int64_t max_iter, double power) {
    double frac = max_iter > 0 ? static_cast<double>(iter) / static_cast<double>(max_iter) : 0.0;
    frac = std::min(1.0, std::max(0.0, frac));
    return base * std::pow(1.0 - frac, power);
}

namespace {

Tensor serialize_optimizer(torch::optim::Adam& opt) {
    std::ostringstream os;
    torch::serialize::OutputArchive ar;
    opt.save(ar);
    ar.save_to(os);
    std::string blob = os.str();
    Tensor t = torch::empty({static_cast<int64_t>(blob.size())}, torch::kUInt8);
    std::memcpy(t.data_ptr(), blob.data(), blob.size());
    return t;
}

void deserialize_optimizer(const Tensor& blob, torch::optim::Adam& opt) {
    std::string s(reinterpret_cast<const char*>(blob.data_ptr()), blob.numel());
    std::istringstream is(s);
    torch::serialize::InputArchive ar;
    ar.load_from(is);
    opt.load(ar);
}

}  // namespace

void save_training_checkpoint(const std::string& path, TriStageNet& model,
                              torch::optim::Adam& opt, int64_t step) {
    ArchiveEntries extra;
    extra.emplace_back("opt.adam", serialize_optimizer(opt));
    extra.emplace_back("rng.torch", at::detail::getDefaultCPUGenerator().get_state());
    extra.emplace_back("meta.step", torch::tensor({step}, torch::kInt64));
    save_model(path, *model, extra);
}

int64_t load_training_checkpoint(const std::string& path, TriStageNet& model,
                                 torch::optim::Adam* opt) {
    auto extra = load_model(path, *model, /*strict=*/true);
    int64_t step = 0;
    if (auto it = extra.find("meta.step"); it != extra.end()) step = it->second[0].item<int64_t>();
    if (opt) {
        if (auto it = extra.find("opt.adam"); it != extra.end()) deserialize_optimizer(it->second, *opt);
        if (auto it = extra.find("rng.torch"); it != extra.end())
            at::detail::getDefaultCPUGenerator().set_state(it->second);
    }
    return step;
}

TrainResult train_model(TriStageNet& model, const Dataset& data, const TrainOptions& opts) {
    TORCH_CHECK(data.size() > 0, "empty dataset");
    if (!opts.out_dir.empty()) fs::create_directories(opts.out_dir);

    torch::optim::Adam optimizer(model->parameters(), torch::optim::AdamOptions(opts.lr));

    int64_t spe = (static_cast<int64_t>(data.size()) + opts.batch_size - 1) / opts.batch_size;
    int64_t total = opts.epochs * spe;
    if (opts.max_steps > 0) total = std::min(total, opts.max_steps);

    int64_t start_step = 0;
    if (!opts.resume_from.empty())
        start_step = load_training_checkpoint(opts.resume_from, model, &optimizer);

    std::ofstream log;
    if (!opts.out_dir.empty()) {
        log.open(fs::path(opts.out_dir) / "train_log.txt",
                 start_step > 0 ? std::ios::app : std::ios::out);
    }

    TrainResult res;
    model->train();
    int64_t step = start_step;
    bool stop = false;
    for (int64_t epoch = step / spe; epoch < opts.epochs && !stop; ++epoch) {
        auto perm = epoch_permutation(data.size(), opts.seed, epoch);
        for (int64_t b = step % spe; b < spe && !stop; ++b) {
            std::vector<size_t> idx(
                perm.begin() + b * opts.batch_size,
                perm.begin() + std::min<int64_t>((b + 1) * opts.batch_size,
                                                 static_cast<int64_t>(perm.size())));
            uint64_t epoch_seed = opts.seed * 0x9E3779B97F4A7C15ull + static_cast<uint64_t>(epoch);
            Batch batch = load_batch(data, idx, opts.augment, epoch_seed, opts.aug, opts.workers);

            double lr = poly_lr(opts.lr, step, total, opts.poly_power);
            for (auto& group : optimizer.param_groups())
                static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);

            optimizer.zero_grad();
            StageOutputs so = model->forward(batch.images);
            LossBreakdown lb = total_loss(so, batch.masks, opts.loss);
            double loss_value = lb.total.item<double>();
            if (!std::isfinite(loss_value))
                throw NumericError("non-finite loss at step " + std::to_string(step));
            lb.total.backward();
            optimizer.step();

            ++step;
            res.steps = step;
            res.last_loss = loss_value;
            if (log) {
                log << "step " << step << " lr " << lr;
                for (const auto& t : lb.terms) log << " " << t.name << " " << t.value;
                log << " total " << loss_value << "\n";
                log.flush();
            }
            if (opts.eval_every > 0 && opts.eval_fn && step % opts.eval_every == 0) {
                model->eval();
                double score = opts.eval_fn(model);
                model->train();
                res.best_score = std::max(res.best_score, score);
                if (log) log << "eval step " << step << " score " << score << "\n";
                if (opts.stop_at_score > 0 && score >= opts.stop_at_score) stop = true;
            }
            if (step >= total) stop = true;
        }
        if (!opts.out_dir.empty() &&
            (stop || (opts.checkpoint_every_epochs > 0 && (epoch + 1) % opts.checkpoint_every_epochs == 0))) {
            std::string path = (fs::path(opts.out_dir) / "checkpoint_last.ckpt").string();
            save_training_checkpoint(path, model, optimizer, step);
            res.final_checkpoint = path;
        }
    }
    if (!opts.out_dir.empty() && res.final_checkpoint.empty()) {
        std::string path = (fs::path(opts.out_dir) / "checkpoint_last.ckpt").string();
        save_training_checkpoint(path, model, optimizer, step);
        res.final_checkpoint = path;
    }
    return res;
}

}  // namespace tristage
