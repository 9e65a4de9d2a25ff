#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tristage/common.hpp"

namespace tristage {

// One training/evaluation pair. `image` is (3,S,S); normalized per-channel
// when loaded through load_sample, raw [0,1] straight out of the synthetic
// generator. `mask` is (1,S,S) in {0,1}.
struct Sample {
    Tensor image;
    Tensor mask;
    std::string name;
};

struct PairPaths {
    std::string image, mask, stem;
};

// Directory convention: root/Imgs/<stem>.<ext> with root/GT/<stem>.png.
std::vector<PairPaths> list_pairs(const std::string& root);

extern const std::array<double, 3> kChannelMean;
extern const std::array<double, 3> kChannelStd;

// Reads, resizes to size x size (image bilinear, mask nearest), binarizes the
// mask at 127/255 and normalizes the image channels.
Sample load_sample(const PairPaths& paths, int64_t size);
Tensor load_image(const std::string& path, int64_t size, bool normalize = true);
Tensor load_mask(const std::string& path, int64_t size);
// Continuous grayscale map scaled to [0,1] (prediction files).
Tensor load_prob_map(const std::string& path, int64_t size);
void write_mask_png(const std::string& path, const Tensor& map01);
void write_image_png(const std::string& path, const Tensor& raw01);

Tensor normalize_image(const Tensor& raw01);

struct AugmentConfig {
    double flip_prob = 0.5;
    double max_rotate_deg = 15.0;
    double max_border_clip = 0.10;
};

// Flip / rotate / border-clip with one shared geometric transform for image
// and mask (mask sampled nearest, so it stays binary).
void augment_inplace(Sample& sample, std::mt19937_64& rng, const AugmentConfig& cfg = {});

struct SyntheticSpec {
    uint64_t seed = 7;
    int64_t count = 16;
    int64_t image_size = 176;
    double fg_min = 0.05;
    double fg_max = 0.30;
    double similarity = 0.6;  // 0 = intensity-disjoint foreground, 1 = background texture
};

// Procedural-noise background with a blob foreground; bit-reproducible for a
// fixed spec. Images are raw [0,1] (not normalized).
std::vector<Sample> generate_synthetic(const SyntheticSpec& spec);

// Writes raw samples to dir/{Imgs,GT} so synthetic data flows through the
// same directory loader as the real datasets.
void materialize(const std::vector<Sample>& raw_samples, const std::string& dir);

// Known dataset sizes asserted when the split matches (CAMO 1,250 / COD10K
// 5,066 / NC4K 4,121 total; train split 1,000 + 3,040).
std::optional<int64_t> expected_count(const std::string& dataset_name, const std::string& split);

class Dataset {
public:
    static Dataset from_directory(const std::string& root, int64_t image_size,
                                  std::optional<int64_t> expected = std::nullopt);
    // Parses either a plain directory or "synthetic:key=value,..." (keys seed,
    // count, size, fg_min, fg_max, similarity), materialized under cache_dir.
    static Dataset open(const std::string& spec, int64_t image_size, const std::string& cache_dir);

    size_t size() const { return pairs_.size(); }
    const PairPaths& paths(size_t i) const { return pairs_[i]; }
    Sample get(size_t i) const;
    Sample get_augmented(size_t i, uint64_t seed, const AugmentConfig& cfg) const;
    Tensor mask_only(size_t i) const;
    int64_t image_size() const { return image_size_; }

private:
    std::vector<PairPaths> pairs_;
    int64_t image_size_ = 0;
};

struct Batch {
    Tensor images;  // (N,3,S,S)
    Tensor masks;   // (N,1,S,S)
    std::vector<std::string> names;
};

// Assembles samples in index order; loading/augmentation fan out over
// `workers` threads but the result is independent of the worker count
// (per-sample seeds derive from the index alone).
Batch load_batch(const Dataset& ds, const std::vector<size_t>& indices, bool augment,
                 uint64_t epoch_seed, const AugmentConfig& cfg, int64_t workers);

// Deterministic per-epoch sample order.
std::vector<size_t> epoch_permutation(size_t n, uint64_t seed, int64_t epoch);

}  // namespace tristage
