#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "tristage/checkpoint.hpp"
#include "tristage/complexity.hpp"
#include "tristage/evalrun.hpp"
#include "tristage/plot.hpp"
#include "tristage/runconfig.hpp"
#include "tristage/train.hpp"

namespace fs = std::filesystem;
using namespace tristage;

namespace {

void add_config_flags(CLI::App* cmd, RunConfig& rc, std::string& config_path) {
    cmd->add_option("--config", config_path, "key=value config file (flags override it)");
    cmd->add_option("--profile", rc.profile, "model profile: full|tiny");
    cmd->add_option("--input-size", rc.input_size, "square input resolution (multiple of 32)");
    cmd->add_option("--crop-size", rc.crop_size, "crop resize target (multiple of 8)");
    cmd->add_option("--expansion-ratio", rc.expansion_ratio, "bounding-box expansion ratio");
    cmd->add_option("--norm", rc.norm, "normalization: batch|group|none");
    cmd->add_option("--lr", rc.lr, "base learning rate");
    cmd->add_option("--poly-power", rc.poly_power, "poly schedule power");
    cmd->add_option("--batch-size", rc.batch_size);
    cmd->add_option("--epochs", rc.epochs);
    cmd->add_option("--max-steps", rc.max_steps, "cap on total optimizer steps");
    cmd->add_option("--seed", rc.seed);
    cmd->add_option("--train-data", rc.train_data, "dataset root(s), comma separated, or synthetic:...");
    cmd->add_option("--eval-data", rc.eval_data);
    cmd->add_option("--out", rc.out_dir, "output directory");
    cmd->add_option("--workers", rc.workers);
    cmd->add_option("--threads", rc.threads, "torch thread count (0 = default)");
    cmd->add_flag("--no-augment", [&rc](int64_t) { rc.augment = false; }, "disable augmentation");
    cmd->add_flag("--loss-at-image-resolution", rc.loss_at_image_resolution,
                  "upsample predictions for the loss instead of downsampling targets");
    cmd->add_flag("--soft-edge-targets", rc.soft_edge_targets);
    cmd->add_option("--checkpoint", rc.checkpoint, "checkpoint to load");
    cmd->add_option("--reference-backbone", rc.reference_backbone,
                    "torchvision-style backbone export to initialize from");
    cmd->add_option("--checkpoint-every", rc.checkpoint_every, "epochs between checkpoints");
    cmd->add_flag("--without-mfem", rc.without_mfem, "replace feature enhancement with one 3x3 conv");
    cmd->add_flag("--mfem-parallel", rc.mfem_parallel, "parallel enhancement branches");
    cmd->add_flag("--without-bem", rc.without_bem, "replace boundary module body with one 3x3 conv");
    cmd->add_flag("--without-edge", rc.without_edge, "drop the edge-map concatenations");
    cmd->add_flag("--without-sfm", rc.without_sfm, "replace split-fusion with concat+conv");
}

RunConfig resolve_config(CLI::App* cmd, const RunConfig& flag_values, const std::string& config_path) {
    RunConfig rc = flag_values;
    if (!config_path.empty()) {
        RunConfig from_file = RunConfig::load(config_path);
        // flags present on the command line win over the file
        RunConfig merged = from_file;
        auto overridden = [&](const std::string& name) { return cmd->count(name) > 0; };
        if (overridden("--profile")) merged.profile = rc.profile;
        if (overridden("--input-size")) merged.input_size = rc.input_size;
        if (overridden("--crop-size")) merged.crop_size = rc.crop_size;
        if (overridden("--expansion-ratio")) merged.expansion_ratio = rc.expansion_ratio;
        if (overridden("--norm")) merged.norm = rc.norm;
        if (overridden("--lr")) merged.lr = rc.lr;
        if (overridden("--poly-power")) merged.poly_power = rc.poly_power;
        if (overridden("--batch-size")) merged.batch_size = rc.batch_size;
        if (overridden("--epochs")) merged.epochs = rc.epochs;
        if (overridden("--max-steps")) merged.max_steps = rc.max_steps;
        if (overridden("--seed")) merged.seed = rc.seed;
        if (overridden("--train-data")) merged.train_data = rc.train_data;
        if (overridden("--eval-data")) merged.eval_data = rc.eval_data;
        if (overridden("--out")) merged.out_dir = rc.out_dir;
        if (overridden("--workers")) merged.workers = rc.workers;
        if (overridden("--threads")) merged.threads = rc.threads;
        if (overridden("--no-augment")) merged.augment = false;
        if (overridden("--loss-at-image-resolution"))
            merged.loss_at_image_resolution = rc.loss_at_image_resolution;
        if (overridden("--soft-edge-targets")) merged.soft_edge_targets = rc.soft_edge_targets;
        if (overridden("--checkpoint")) merged.checkpoint = rc.checkpoint;
        if (overridden("--reference-backbone")) merged.reference_backbone = rc.reference_backbone;
        if (overridden("--checkpoint-every")) merged.checkpoint_every = rc.checkpoint_every;
        if (overridden("--without-mfem")) merged.without_mfem = rc.without_mfem;
        if (overridden("--mfem-parallel")) merged.mfem_parallel = rc.mfem_parallel;
        if (overridden("--without-bem")) merged.without_bem = rc.without_bem;
        if (overridden("--without-edge")) merged.without_edge = rc.without_edge;
        if (overridden("--without-sfm")) merged.without_sfm = rc.without_sfm;
        rc = merged;
    }
    rc.validate();
    if (rc.threads > 0) torch::set_num_threads(static_cast<int>(rc.threads));
    torch::manual_seed(rc.seed);
    return rc;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t end = s.find(',', pos);
        if (end == std::string::npos) end = s.size();
        if (end > pos) out.push_back(s.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

TriStageNet build_model(const RunConfig& rc) {
    TriStageNet model(rc.model_config());
    if (!rc.reference_backbone.empty())
        load_reference_backbone(*model, rc.reference_backbone, rc.pretrained_shared_leaves);
    if (!rc.checkpoint.empty()) load_model(rc.checkpoint, *model, /*strict=*/false);
    return model;
}

int cmd_train(const RunConfig& rc) {
    if (rc.train_data.empty()) throw ConfigError("train needs --train-data (or config train_data)");
    fs::create_directories(rc.out_dir);
    rc.save((fs::path(rc.out_dir) / "resolved.cfg").string());

    ModelConfig mc = rc.model_config();
    Dataset data = Dataset::open(rc.train_data, mc.input_size,
                                 (fs::path(rc.out_dir) / "data_cache").string());
    TriStageNet model = build_model(rc);

    TrainOptions to;
    to.lr = rc.lr;
    to.poly_power = rc.poly_power;
    to.batch_size = rc.batch_size;
    to.epochs = rc.epochs;
    to.max_steps = rc.max_steps;
    to.seed = rc.seed;
    to.workers = rc.workers;
    to.augment = rc.augment;
    to.aug = rc.augment_config();
    to.loss = rc.loss_options();
    to.out_dir = rc.out_dir;
    to.checkpoint_every_epochs = rc.checkpoint_every;

    TrainResult tr = train_model(model, data, to);
    std::cout << "trained " << tr.steps << " steps, final loss " << tr.last_loss
              << ", checkpoint " << tr.final_checkpoint << "\n";
    return 0;
}

int cmd_eval(const RunConfig& rc, const std::string& pred_dir, bool per_decoder, bool small_subsets) {
    if (rc.eval_data.empty()) throw ConfigError("eval needs --eval-data");
    fs::create_directories(rc.out_dir);
    rc.save((fs::path(rc.out_dir) / "resolved.cfg").string());
    ModelConfig mc = rc.model_config();

    std::optional<TriStageNet> model;
    if (pred_dir.empty()) {
        if (rc.checkpoint.empty())
            throw ConfigError("eval needs --checkpoint (or --pred-dir for precomputed maps)");
        model = build_model(rc);
    }
    for (const std::string& root : split_list(rc.eval_data)) {
        EvalOptions eo;
        eo.label = fs::path(root).filename().string();
        if (eo.label.empty() || eo.label.find(':') != std::string::npos) eo.label = "dataset";
        eo.out_dir = rc.out_dir;
        eo.per_decoder = per_decoder;
        if (small_subsets) eo.small_taus = {1.0 / 8, 1.0 / 16, 1.0 / 32};
        eo.workers = rc.workers;
        Dataset data = Dataset::open(root, mc.input_size,
                                     (fs::path(rc.out_dir) / "data_cache").string());
        EvalResult res = pred_dir.empty() ? evaluate_model(*model, data, eo)
                                          : evaluate_predictions(pred_dir, data, eo);
        for (const auto& row : res.rows)
            std::cout << row.label << " n=" << row.count << " S_m=" << row.s_m
                      << " F_w=" << row.f_w << " MAE=" << row.mae_v << " E_m=" << row.e_m << "\n";
    }
    return 0;
}

int cmd_infer(const RunConfig& rc) {
    if (rc.eval_data.empty()) throw ConfigError("infer needs --eval-data");
    if (rc.checkpoint.empty()) throw ConfigError("infer needs --checkpoint");
    fs::create_directories(rc.out_dir);
    rc.save((fs::path(rc.out_dir) / "resolved.cfg").string());
    ModelConfig mc = rc.model_config();
    TriStageNet model = build_model(rc);
    for (const std::string& root : split_list(rc.eval_data)) {
        Dataset data = Dataset::open(root, mc.input_size,
                                     (fs::path(rc.out_dir) / "data_cache").string());
        std::string sub = fs::path(root).filename().string();
        if (sub.empty() || sub.find(':') != std::string::npos) sub = "maps";
        run_inference(model, data, (fs::path(rc.out_dir) / sub).string());
        std::cout << "wrote maps for " << data.size() << " images to "
                  << (fs::path(rc.out_dir) / sub).string() << "\n";
    }
    return 0;
}

int cmd_bench(const RunConfig& rc, int64_t runs, int64_t max_batch) {
    ModelConfig mc = rc.model_config();
    TriStageNet model(mc);
    model->eval();
    ComplexityReport rep = analyze_complexity(model);
    std::cout << "profile " << rc.profile << " input " << mc.input_size << " crop " << mc.crop_size
              << "\n";
    std::cout << "params_m " << rep.params_m() << "\n";
    std::cout << "gmacs " << rep.gmacs() << "\n";
    for (const auto& [part, macs] : rep.macs_by_part)
        std::cout << "  " << part << " " << static_cast<double>(macs) / 1e9 << "\n";

    torch::NoGradGuard guard;
    auto time_batch = [&](int64_t n) {
        Tensor img = torch::randn({n, 3, mc.input_size, mc.input_size});
        model->forward(img);  // warmup
        auto t0 = std::chrono::steady_clock::now();
        for (int64_t r = 0; r < runs; ++r) model->forward(img);
        auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double>(t1 - t0).count() / static_cast<double>(runs);
    };
    double lat = time_batch(1);
    std::cout << "latency_s " << lat << "\n";
    double best = 1.0 / lat;
    int64_t best_n = 1;
    for (int64_t n = 2; n <= max_batch; n *= 2) {
        double t = time_batch(n);
        double ips = static_cast<double>(n) / t;
        if (ips > best) {
            best = ips;
            best_n = n;
        }
    }
    std::cout << "throughput_images_per_s " << best << " at_batch " << best_n << "\n";
    return 0;
}

int cmd_plot(const std::string& kind, const std::string& curves, const std::string& labels,
             const std::string& image, const RunConfig& rc, const std::string& out) {
    if (kind == "montage") {
        if (rc.checkpoint.empty() || image.empty())
            throw ConfigError("plot montage needs --checkpoint and --image");
        TriStageNet model = build_model(rc);
        plot_montage(model, image, out);
    } else {
        plot_curves(split_list(curves), split_list(labels), kind, out);
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three-stage camouflaged object detection"};
    app.require_subcommand(1);

    RunConfig rc;
    std::string config_path, pred_dir, plot_kind = "pr", plot_curves_arg, plot_labels, plot_image,
                              plot_out = "plot.png";
    bool per_decoder = false, small_subsets = false;
    int64_t bench_runs = 2, bench_max_batch = 4;

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_config_flags(train, rc, config_path);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint or prediction maps");
    add_config_flags(eval, rc, config_path);
    eval->add_option("--pred-dir", pred_dir, "precomputed prediction maps");
    eval->add_flag("--per-decoder", per_decoder, "also report first/second decoder rows");
    eval->add_flag("--small-subsets", small_subsets, "add Small8/16/32 rows");
    CLI::App* infer = app.add_subcommand("infer", "write prediction maps and a manifest");
    add_config_flags(infer, rc, config_path);
    CLI::App* plot = app.add_subcommand("plot", "plot curves or feature montages");
    add_config_flags(plot, rc, config_path);
    plot->add_option("--kind", plot_kind, "pr | f | montage");
    plot->add_option("--curves", plot_curves_arg, "comma-separated curve TSV files");
    plot->add_option("--labels", plot_labels, "comma-separated legend labels");
    plot->add_option("--image", plot_image, "input image for montages");
    plot->add_option("--plot-out", plot_out, "output image file");
    CLI::App* bench = app.add_subcommand("bench", "parameter/MAC/latency report");
    add_config_flags(bench, rc, config_path);
    bench->add_option("--runs", bench_runs, "timed repetitions");
    bench->add_option("--max-batch", bench_max_batch, "largest batch for throughput");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        RunConfig cfg = resolve_config(sub, rc, config_path);
        if (sub == train) return cmd_train(cfg);
        if (sub == eval) return cmd_eval(cfg, pred_dir, per_decoder, small_subsets);
        if (sub == infer) return cmd_infer(cfg);
        if (sub == bench) return cmd_bench(cfg, bench_runs, bench_max_batch);
        if (sub == plot) return cmd_plot(plot_kind, plot_curves_arg, plot_labels, plot_image, cfg,
                                         plot_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const SizingError& e) {
        std::cerr << "sizing error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
