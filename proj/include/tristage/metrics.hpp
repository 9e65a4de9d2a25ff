#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tristage/common.hpp"

namespace tristage {

// Segmentation quality measures over P in [0,1] and binary G (thresholded at
// 0.5 on input). Conventions, pinned here and mirrored by the test oracles:
//  - thresholded sweeps use the 256 thresholds t/256 (t = 0..255) with a
//    strictly-greater comparison, so an exact binary prediction is a fixed
//    point at every threshold;
//  - structural measure: alpha = 0.5, sample (N-1) variances, centroid split;
//  - alignment measure: mean over the 256 thresholds, enhanced matrix averaged
//    over all N pixels;
//  - weighted F: beta^2 = 1, Gaussian 7x7 sigma 5 dependency smoothing,
//    exponential importance decay 2 - exp(ln(0.5)/5 * dist); nearest-foreground
//    ties resolved to the smallest column, then the smallest row;
//  - empty-G conventions: S = 1 - mean(P), E from the all-background branch,
//    weighted F = 0; zero-division in precision/recall/F yields 0.

double mae(const Tensor& pred, const Tensor& gt);
double s_measure(const Tensor& pred, const Tensor& gt);
double e_measure_mean(const Tensor& pred, const Tensor& gt);
double weighted_f(const Tensor& pred, const Tensor& gt);

struct Curves {
    std::array<double, 256> precision{};
    std::array<double, 256> recall{};
    std::array<double, 256> f{};  // beta^2 = 0.3
};
Curves pr_f_curves(const Tensor& pred, const Tensor& gt);

// Per-image preprocessing used by the evaluation driver before thresholded
// metrics: min-max normalization then 8-bit quantization to k/255 levels.
Tensor normalize_for_eval(const Tensor& pred);
Tensor quantize256(const Tensor& pred);

struct MetricSummary {
    double s_m = 0, f_w = 0, mae_v = 0, e_m = 0;
};
MetricSummary evaluate_pair(const Tensor& pred, const Tensor& gt, bool normalize = true);

// Foreground-fraction predicate for the small-target subsets.
bool is_small_target(const Tensor& gt, double tau);

namespace metrics_detail {

struct Grid {
    int64_t h = 0, w = 0;
    std::vector<double> v;
    double& at(int64_t r, int64_t c) { return v[r * w + c]; }
    double at(int64_t r, int64_t c) const { return v[r * w + c]; }
};

Grid to_grid(const Tensor& t);

// Exact Euclidean distance to the nearest foreground pixel plus that pixel's
// linear index; ties go to the smallest column, then the smallest row.
void distance_to_foreground(const std::vector<char>& fg, int64_t h, int64_t w,
                            std::vector<double>* dist, std::vector<int64_t>* nearest);

}  // namespace metrics_detail

}  // namespace tristage
