#include "tristage/runconfig.hpp"

#include <fstream>
#include <sstream>

namespace tristage {

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> RunConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["profile"] = profile;
    kv["input_size"] = std::to_string(input_size);
    kv["crop_size"] = std::to_string(crop_size);
    kv["expansion_ratio"] = fmt_double(expansion_ratio);
    kv["norm"] = norm;
    kv["lr"] = fmt_double(lr);
    kv["poly_power"] = fmt_double(poly_power);
    kv["batch_size"] = std::to_string(batch_size);
    kv["epochs"] = std::to_string(epochs);
    kv["max_steps"] = std::to_string(max_steps);
    kv["seed"] = std::to_string(seed);
    kv["train_data"] = train_data;
    kv["eval_data"] = eval_data;
    kv["out_dir"] = out_dir;
    kv["workers"] = std::to_string(workers);
    kv["threads"] = std::to_string(threads);
    kv["augment"] = augment ? "1" : "0";
    kv["aug_rotate_deg"] = fmt_double(aug_rotate_deg);
    kv["aug_border_clip"] = fmt_double(aug_border_clip);
    kv["loss_at_image_resolution"] = loss_at_image_resolution ? "1" : "0";
    kv["soft_edge_targets"] = soft_edge_targets ? "1" : "0";
    kv["edge_gt_threshold"] = fmt_double(edge_gt_threshold);
    kv["without_mfem"] = without_mfem ? "1" : "0";
    kv["mfem_parallel"] = mfem_parallel ? "1" : "0";
    kv["without_bem"] = without_bem ? "1" : "0";
    kv["without_edge"] = without_edge ? "1" : "0";
    kv["without_sfm"] = without_sfm ? "1" : "0";
    kv["checkpoint"] = checkpoint;
    kv["reference_backbone"] = reference_backbone;
    kv["checkpoint_every"] = std::to_string(checkpoint_every);
    kv["pretrained_shared_leaves"] = pretrained_shared_leaves ? "1" : "0";
    return kv;
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    for (const auto& [key, v] : kv) {
        if (key == "profile") c.profile = v;
        else if (key == "input_size") c.input_size = std::stoll(v);
        else if (key == "crop_size") c.crop_size = std::stoll(v);
        else if (key == "expansion_ratio") c.expansion_ratio = std::stod(v);
        else if (key == "norm") c.norm = v;
        else if (key == "lr") c.lr = std::stod(v);
        else if (key == "poly_power") c.poly_power = std::stod(v);
        else if (key == "batch_size") c.batch_size = std::stoll(v);
        else if (key == "epochs") c.epochs = std::stoll(v);
        else if (key == "max_steps") c.max_steps = std::stoll(v);
        else if (key == "seed") c.seed = std::stoull(v);
        else if (key == "train_data") c.train_data = v;
        else if (key == "eval_data") c.eval_data = v;
        else if (key == "out_dir") c.out_dir = v;
        else if (key == "workers") c.workers = std::stoll(v);
        else if (key == "threads") c.threads = std::stoll(v);
        else if (key == "augment") c.augment = parse_bool(v, key);
        else if (key == "aug_rotate_deg") c.aug_rotate_deg = std::stod(v);
        else if (key == "aug_border_clip") c.aug_border_clip = std::stod(v);
        else if (key == "loss_at_image_resolution") c.loss_at_image_resolution = parse_bool(v, key);
        else if (key == "soft_edge_targets") c.soft_edge_targets = parse_bool(v, key);
        else if (key == "edge_gt_threshold") c.edge_gt_threshold = std::stod(v);
        else if (key == "without_mfem") c.without_mfem = parse_bool(v, key);
        else if (key == "mfem_parallel") c.mfem_parallel = parse_bool(v, key);
        else if (key == "without_bem") c.without_bem = parse_bool(v, key);
        else if (key == "without_edge") c.without_edge = parse_bool(v, key);
        else if (key == "without_sfm") c.without_sfm = parse_bool(v, key);
        else if (key == "checkpoint") c.checkpoint = v;
        else if (key == "reference_backbone") c.reference_backbone = v;
        else if (key == "checkpoint_every") c.checkpoint_every = std::stoll(v);
        else if (key == "pretrained_shared_leaves") c.pretrained_shared_leaves = parse_bool(v, key);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    return c;
}

void RunConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write config to '" + path + "'");
    for (const auto& [k, v] : to_kv()) os << k << "=" << v << "\n";
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read config '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return from_kv(kv);
}

void RunConfig::validate() const {
    if (profile != "full" && profile != "tiny")
        throw ConfigError("profile must be 'full' or 'tiny', got '" + profile + "'");
    if (without_mfem && mfem_parallel)
        throw ConfigError(
            "without_mfem and mfem_parallel contradict each other: the variant table lists "
            "'w/o MFEM' (single 3x3 conv) and 'MFEM-Parallel' as separate rows");
    if (without_bem && without_edge)
        throw ConfigError(
            "without_bem and without_edge contradict each other: 'w/o BEM' (single 3x3 conv) "
            "already removes the edge path that 'w/o edge' modifies");
    if (without_sfm && without_edge)
        throw ConfigError(
            "without_sfm and without_edge contradict each other: the fusion-module table lists "
            "'w/o SFM' and 'w/o edge' as separate rows");
    model_config().validate();
}

ModelConfig RunConfig::model_config() const {
    ModelConfig m = profile == "tiny" ? ModelConfig::tiny() : ModelConfig::full();
    if (input_size > 0) m.input_size = input_size;
    if (crop_size > 0) m.crop_size = crop_size;
    m.expansion_ratio = expansion_ratio;
    if (!norm.empty()) m.norm = norm_from_string(norm);
    m.without_mfem = without_mfem;
    m.mfem_parallel = mfem_parallel;
    m.without_bem = without_bem;
    m.without_edge = without_edge;
    m.without_sfm = without_sfm;
    m.leaves_share_init = pretrained_shared_leaves;
    return m;
}

LossOptions RunConfig::loss_options() const {
    LossOptions o;
    o.at_image_resolution = loss_at_image_resolution;
    o.soft_edge_targets = soft_edge_targets;
    o.edge_gt_threshold = edge_gt_threshold;
    return o;
}

AugmentConfig RunConfig::augment_config() const {
    AugmentConfig a;
    a.max_rotate_deg = aug_rotate_deg;
    a.max_border_clip = aug_border_clip;
    return a;
}

}  // namespace tristage
