#pragma once

#include <cstdint>
#include <string>

#include "tristage/common.hpp"

namespace tristage {

// Integer rectangle in feature coordinates, inclusive on both ends.
struct BBox {
    int64_t x_min = 0;
    int64_t y_min = 0;
    int64_t x_max = 0;
    int64_t y_max = 0;
    double expansion_ratio = 1.0;
    bool expanded = false;  // true once the r-expansion has been applied
    bool fallback = false;  // true when an empty detection forced the full-grid box

    int64_t width() const { return x_max - x_min + 1; }
    int64_t height() const { return y_max - y_min + 1; }
    bool contains(const BBox& o) const {
        return x_min <= o.x_min && y_min <= o.y_min && x_max >= o.x_max && y_max >= o.y_max;
    }
    std::string to_string() const;
};

// E = |P3a(M) - M| with a 3x3 stride-1 average pool whose divisor is the
// clipped window size, so a constant map yields exactly zero everywhere.
// Accepts (N,1,H,W) or (1,H,W) or (H,W); shape is preserved.
Tensor derive_boundary(const Tensor& m);

// (M - min) / (max - min) per sample. A constant map comes back all-zero and,
// when `degenerate` is given, gets its per-sample flag set (empty detection).
Tensor normalize_minmax(const Tensor& m, std::vector<bool>* degenerate = nullptr);

// Strictly-greater threshold: 1 where x > tau, else 0 (0.5 maps to 0).
Tensor binarize(const Tensor& x, double tau = 0.5);

// Locate the joint axis-extreme box of the nonzero region of `mask_binary`
// (any shape ending in H,W; upsampled to the target grid with nearest first),
// then expand to a square of side r*l about the center, flooring min edges and
// ceiling max edges, and clamp to the grid. Empty mask -> full-grid fallback.
BBox compute_bbox(const Tensor& mask_binary, double expansion_ratio, int64_t grid_h, int64_t grid_w);

// Inclusive-slice the box out of (C,H,W) or (N,C,H,W) features and resize
// bilinearly to size x size.
Tensor crop_resize(const Tensor& features, const BBox& box, int64_t size);

// Resize (C,s,s) or (N,C,s,s) to the box extent and write it into a zero
// canvas of (canvas_h, canvas_w); exact zeros outside the box.
Tensor restore(const Tensor& patch, const BBox& box, int64_t canvas_h, int64_t canvas_w);

}  // namespace tristage
