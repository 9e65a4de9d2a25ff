#include "tristage/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <thread>

namespace fs = std::filesystem;

namespace tristage {

const std::array<double, 3> kChannelMean = {0.485, 0.456, 0.406};
const std::array<double, 3> kChannelStd = {0.229, 0.224, 0.225};

std::vector<PairPaths> list_pairs(const std::string& root) {
    fs::path imgs = fs::path(root) / "Imgs";
    fs::path gt = fs::path(root) / "GT";
    if (!fs::is_directory(imgs) || !fs::is_directory(gt))
        throw DataError("dataset root '" + root + "' must contain Imgs/ and GT/ directories");
    std::vector<PairPaths> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(imgs))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::string stem = f.stem().string();
        fs::path mask = gt / (stem + ".png");
        if (!fs::exists(mask)) {
            for (const char* ext : {".jpg", ".bmp", ".jpeg"}) {
                fs::path alt = gt / (stem + ext);
                if (fs::exists(alt)) { mask = alt; break; }
            }
        }
        if (!fs::exists(mask))
            throw DataError("no ground-truth mask for '" + f.string() + "' under " + gt.string());
        out.push_back({f.string(), mask.string(), stem});
    }
    if (out.empty()) throw DataError("dataset root '" + root + "' has no image/mask pairs");
    return out;
}

Tensor normalize_image(const Tensor& raw01) {
    Tensor mean = torch::tensor({kChannelMean[0], kChannelMean[1], kChannelMean[2]},
                                raw01.options()).reshape({3, 1, 1});
    Tensor std = torch::tensor({kChannelStd[0], kChannelStd[1], kChannelStd[2]},
                               raw01.options()).reshape({3, 1, 1});
    return (raw01 - mean) / std;
}

Tensor load_image(const std::string& path, int64_t size, bool normalize) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) throw DataError("cannot read image '" + path + "'");
    cv::cvtColor(img, img, cv::COLOR_BGR2RGB);
    cv::resize(img, img, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
               cv::INTER_LINEAR);
    img.convertTo(img, CV_32FC3, 1.0 / 255.0);
    Tensor t = torch::from_blob(img.data, {size, size, 3}, torch::kFloat32).clone();
    t = t.permute({2, 0, 1}).contiguous();
    return normalize ? normalize_image(t) : t;
}

Tensor load_mask(const std::string& path, int64_t size) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw DataError("cannot read mask '" + path + "'");
    cv::resize(m, m, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
               cv::INTER_NEAREST);
    Tensor t = torch::from_blob(m.data, {size, size}, torch::kUInt8).clone();
    return (t > 127).to(torch::kFloat32).unsqueeze(0);
}

Tensor load_prob_map(const std::string& path, int64_t size) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    if (m.empty()) throw DataError("cannot read map '" + path + "'");
    cv::resize(m, m, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
               cv::INTER_LINEAR);
    Tensor t = torch::from_blob(m.data, {size, size}, torch::kUInt8).clone();
    return t.to(torch::kFloat32).unsqueeze(0) / 255.0;
}

Sample load_sample(const PairPaths& paths, int64_t size) {
    return {load_image(paths.image, size), load_mask(paths.mask, size), paths.stem};
}

void write_mask_png(const std::string& path, const Tensor& map01) {
    Tensor t = map01.detach().to(torch::kFloat32).clamp(0, 1).squeeze();
    TORCH_CHECK(t.dim() == 2, "write_mask_png expects a single map");
    t = (t * 255.0).round().to(torch::kUInt8).contiguous();
    cv::Mat m(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC1, t.data_ptr());
    if (!cv::imwrite(path, m)) throw DataError("cannot write '" + path + "'");
}

void write_image_png(const std::string& path, const Tensor& raw01) {
    Tensor t = raw01.detach().to(torch::kFloat32).clamp(0, 1);
    TORCH_CHECK(t.dim() == 3 && t.size(0) == 3, "write_image_png expects (3,H,W)");
    t = (t.permute({1, 2, 0}) * 255.0).round().to(torch::kUInt8).contiguous();
    cv::Mat rgb(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_8UC3, t.data_ptr());
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path, bgr)) throw DataError("cannot write '" + path + "'");
}

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

Tensor rotate_with(const Tensor& x, double deg, bool nearest) {
    double a = deg * M_PI / 180.0;
    Tensor theta = torch::tensor({{std::cos(a), -std::sin(a), 0.0},
                                  {std::sin(a), std::cos(a), 0.0}},
                                 torch::kFloat32).unsqueeze(0);
    Tensor in = x.unsqueeze(0);
    Tensor grid = torch::nn::functional::affine_grid(theta, in.sizes().vec(), false);
    auto opts = torch::nn::functional::GridSampleFuncOptions()
                    .padding_mode(torch::kZeros)
                    .align_corners(false);
    if (nearest)
        opts.mode(torch::kNearest);
    else
        opts.mode(torch::kBilinear);
    return torch::nn::functional::grid_sample(in, grid, opts).squeeze(0);
}

}  // namespace

void augment_inplace(Sample& sample, std::mt19937_64& rng, const AugmentConfig& cfg) {
    int64_t s = sample.image.size(-1);
    if (uniform01(rng) < cfg.flip_prob) {
        sample.image = sample.image.flip(-1);
        sample.mask = sample.mask.flip(-1);
    }
    double deg = uniform(rng, -cfg.max_rotate_deg, cfg.max_rotate_deg);
    if (cfg.max_rotate_deg > 0) {
        sample.image = rotate_with(sample.image, deg, false);
        sample.mask = rotate_with(sample.mask, deg, true);
    }
    if (cfg.max_border_clip > 0) {
        auto margin = [&](void) { return static_cast<int64_t>(uniform(rng, 0, cfg.max_border_clip) *
                                                              static_cast<double>(s)); };
        int64_t top = margin(), bottom = margin(), left = margin(), right = margin();
        int64_t h = s - top - bottom, w = s - left - right;
        Tensor img = sample.image.slice(1, top, top + h).slice(2, left, left + w).unsqueeze(0);
        Tensor msk = sample.mask.slice(1, top, top + h).slice(2, left, left + w).unsqueeze(0);
        sample.image = upsample_bilinear(img, s, s).squeeze(0);
        sample.mask = upsample_nearest(msk, s, s).squeeze(0);
    }
}

namespace {

// Two-octave value noise in [0,1].
Tensor value_noise(std::mt19937_64& rng, int64_t size) {
    auto grid = [&](int64_t g) {
        Tensor t = torch::empty({1, 1, g, g}, torch::kFloat32);
        auto acc = t.accessor<float, 4>();
        for (int64_t i = 0; i < g; ++i)
            for (int64_t j = 0; j < g; ++j) acc[0][0][i][j] = static_cast<float>(uniform01(rng));
        return upsample_bilinear(t, size, size).squeeze(0).squeeze(0);
    };
    Tensor n = grid(8) + 0.35 * grid(32);
    double mn = n.min().item<double>(), mx = n.max().item<double>();
    return mx > mn ? (n - mn) / (mx - mn) : torch::zeros_like(n);
}

}  // namespace

std::vector<Sample> generate_synthetic(const SyntheticSpec& spec) {
    if (spec.count < 1 || spec.image_size < 32)
        throw ConfigError("synthetic spec needs count >= 1 and image_size >= 32");
    if (!(spec.fg_min > 0 && spec.fg_max > spec.fg_min && spec.fg_max < 0.9))
        throw ConfigError("synthetic foreground fraction range must satisfy 0 < min < max < 0.9");
    std::vector<Sample> out;
    int64_t s = spec.image_size;
    for (int64_t k = 0; k < spec.count; ++k) {
        std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull * (k + 1));
        Tensor bg_tex = value_noise(rng, s);
        Tensor fg_tex = value_noise(rng, s);

        double cx = uniform(rng, 0.35, 0.65) * s;
        double cy = uniform(rng, 0.35, 0.65) * s;
        double target = uniform(rng, spec.fg_min, spec.fg_max);
        double radius = s * std::sqrt(target / M_PI);
        std::array<double, 3> amp, phase;
        for (int h = 0; h < 3; ++h) {
            amp[h] = uniform(rng, 0, 0.22) / (h + 1);
            phase[h] = uniform(rng, 0, 2 * M_PI);
        }

        Tensor ys = torch::arange(s, torch::kFloat32).reshape({s, 1}).expand({s, s});
        Tensor xs = torch::arange(s, torch::kFloat32).reshape({1, s}).expand({s, s});
        Tensor mask;
        double fraction = 0;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Tensor dx = xs - cx, dy = ys - cy;
            Tensor theta = torch::atan2(dy, dx);
            Tensor rho = torch::ones_like(theta);
            for (int h = 0; h < 3; ++h)
                rho = rho + amp[h] * torch::sin((h + 1) * theta + phase[h]);
            mask = ((dx * dx + dy * dy).sqrt() < radius * rho).to(torch::kFloat32);
            fraction = mask.mean().item<double>();
            if (fraction >= spec.fg_min && fraction <= spec.fg_max) break;
            radius *= std::sqrt(std::max(1e-6, target / std::max(fraction, 1e-6)));
        }

        // Background sits in a mid band; the plain foreground is brighter and
        // intensity-disjoint, then pulled toward the background texture by the
        // similarity knob.
        Tensor bg = 0.15 + 0.45 * bg_tex;
        Tensor fg_plain = 0.70 + 0.25 * fg_tex;
        Tensor fg = spec.similarity * (0.15 + 0.45 * bg_tex) + (1.0 - spec.similarity) * fg_plain;
        Tensor base = bg * (1 - mask) + fg * mask;
        Tensor chroma = value_noise(rng, s) - 0.5;
        std::vector<Tensor> chans;
        for (int c = 0; c < 3; ++c)
            chans.push_back((base + 0.06 * (c - 1) * chroma).clamp(0, 1));
        char name[32];
        std::snprintf(name, sizeof(name), "synth_%04lld", static_cast<long long>(k));
        out.push_back({torch::stack(chans), mask.unsqueeze(0), name});
    }
    return out;
}

void materialize(const std::vector<Sample>& raw_samples, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "Imgs");
    fs::create_directories(fs::path(dir) / "GT");
    for (const auto& s : raw_samples) {
        write_image_png((fs::path(dir) / "Imgs" / (s.name + ".png")).string(), s.image);
        write_mask_png((fs::path(dir) / "GT" / (s.name + ".png")).string(), s.mask);
    }
}

std::optional<int64_t> expected_count(const std::string& dataset_name, const std::string& split) {
    if (dataset_name == "CAMO") return split == "train" ? 1000 : (split == "test" ? 250 : 1250);
    if (dataset_name == "COD10K") return split == "train" ? 3040 : (split == "test" ? 2026 : 5066);
    if (dataset_name == "NC4K" && (split == "test" || split == "all")) return 4121;
    return std::nullopt;
}

Dataset Dataset::from_directory(const std::string& root, int64_t image_size,
                                std::optional<int64_t> expected) {
    Dataset ds;
    ds.pairs_ = list_pairs(root);
    ds.image_size_ = image_size;
    if (expected && static_cast<int64_t>(ds.pairs_.size()) != *expected)
        throw DataError("dataset '" + root + "' has " + std::to_string(ds.pairs_.size()) +
                        " pairs, expected " + std::to_string(*expected));
    return ds;
}

Dataset Dataset::open(const std::string& spec, int64_t image_size, const std::string& cache_dir) {
    if (spec.rfind("synthetic:", 0) != 0 && spec != "synthetic")
        return from_directory(spec, image_size);
    SyntheticSpec sp;
    sp.image_size = image_size;
    if (spec.size() > 10) {
        std::string args = spec.substr(10);
        size_t pos = 0;
        while (pos < args.size()) {
            size_t end = args.find(',', pos);
            if (end == std::string::npos) end = args.size();
            std::string kv = args.substr(pos, end - pos);
            size_t eq = kv.find('=');
            if (eq == std::string::npos) throw ConfigError("bad synthetic spec token '" + kv + "'");
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            if (key == "seed") sp.seed = std::stoull(val);
            else if (key == "count") sp.count = std::stoll(val);
            else if (key == "size") sp.image_size = std::stoll(val);
            else if (key == "fg_min") sp.fg_min = std::stod(val);
            else if (key == "fg_max") sp.fg_max = std::stod(val);
            else if (key == "similarity") sp.similarity = std::stod(val);
            else throw ConfigError("unknown synthetic spec key '" + key + "'");
            pos = end + 1;
        }
    }
    char tag[128];
    std::snprintf(tag, sizeof(tag), "synth_s%llu_n%lld_%lld",
                  static_cast<unsigned long long>(sp.seed), static_cast<long long>(sp.count),
                  static_cast<long long>(sp.image_size));
    fs::path dir = fs::path(cache_dir) / tag;
    if (!fs::exists(dir / "Imgs")) materialize(generate_synthetic(sp), dir.string());
    return from_directory(dir.string(), image_size);
}

Sample Dataset::get(size_t i) const { return load_sample(pairs_.at(i), image_size_); }

Sample Dataset::get_augmented(size_t i, uint64_t seed, const AugmentConfig& cfg) const {
    Sample s = get(i);
    std::mt19937_64 rng(seed);
    augment_inplace(s, rng, cfg);
    return s;
}

Tensor Dataset::mask_only(size_t i) const { return load_mask(pairs_.at(i).mask, image_size_); }

std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, int64_t epoch) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed ^ (0xA24BAED4963EE407ull * static_cast<uint64_t>(epoch + 1)));
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

Batch load_batch(const Dataset& ds, const std::vector<size_t>& indices, bool augment,
                 uint64_t epoch_seed, const AugmentConfig& cfg, int64_t workers) {
    std::vector<Sample> samples(indices.size());
    auto load_one = [&](size_t slot) {
        size_t i = indices[slot];
        uint64_t sample_seed = epoch_seed * 0x9E3779B97F4A7C15ull + 0xBF58476D1CE4E5B9ull * (i + 1);
        samples[slot] = augment ? ds.get_augmented(i, sample_seed, cfg) : ds.get(i);
    };
    int64_t nw = std::max<int64_t>(1, std::min<int64_t>(workers, static_cast<int64_t>(indices.size())));
    if (nw == 1) {
        for (size_t s = 0; s < indices.size(); ++s) load_one(s);
    } else {
        std::vector<std::thread> pool;
        std::atomic<size_t> next{0};
        for (int64_t t = 0; t < nw; ++t)
            pool.emplace_back([&] {
                for (size_t s = next.fetch_add(1); s < indices.size(); s = next.fetch_add(1))
                    load_one(s);
            });
        for (auto& t : pool) t.join();
    }
    Batch b;
    std::vector<Tensor> imgs, masks;
    for (auto& s : samples) {
        imgs.push_back(s.image);
        masks.push_back(s.mask);
        b.names.push_back(s.name);
    }
    b.images = torch::stack(imgs);
    b.masks = torch::stack(masks);
    return b;
}

}  // namespace tristage
