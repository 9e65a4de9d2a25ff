#include "tristage/geometry.hpp"

#include <cmath>

namespace tristage {

std::string BBox::to_string() const {
    std::string s = std::to_string(x_min) + " " + std::to_string(y_min) + " " +
                    std::to_string(x_max) + " " + std::to_string(y_max);
    if (fallback) s += " fallback";
    return s;
}

namespace {

// Temporarily view x as (N,C,H,W) for pooling/resizing ops.
Tensor as_nchw(const Tensor& x, int64_t* leading) {
    *leading = x.dim();
    if (x.dim() == 2) return x.unsqueeze(0).unsqueeze(0);
    if (x.dim() == 3) return x.unsqueeze(0);
    return x;
}

Tensor from_nchw(const Tensor& x, int64_t leading) {
    if (leading == 2) return x.squeeze(0).squeeze(0);
    if (leading == 3) return x.squeeze(0);
    return x;
}

}  // namespace

Tensor derive_boundary(const Tensor& m) {
    int64_t lead = 0;
    Tensor x = as_nchw(m, &lead);
    Tensor pooled = avg_pool_clipped(x, 3, 1, 1);
    return from_nchw((pooled - x).abs(), lead);
}

Tensor normalize_minmax(const Tensor& m, std::vector<bool>* degenerate) {
    int64_t lead = 0;
    Tensor x = as_nchw(m, &lead);
    int64_t n = x.size(0);
    Tensor flat = x.reshape({n, -1});
    Tensor mn = std::get<0>(flat.min(1)).reshape({n, 1, 1, 1});
    Tensor mx = std::get<0>(flat.max(1)).reshape({n, 1, 1, 1});
    Tensor range = mx - mn;
    Tensor ok = range > 0;
    if (degenerate) {
        degenerate->resize(n);
        auto ok_cpu = ok.reshape({n}).to(torch::kBool);
        auto acc = ok_cpu.accessor<bool, 1>();
        for (int64_t i = 0; i < n; ++i) (*degenerate)[i] = !acc[i];
    }
    Tensor safe_range = torch::where(ok, range, torch::ones_like(range));
    Tensor out = torch::where(ok.expand_as(x), (x - mn) / safe_range, torch::zeros_like(x));
    return from_nchw(out, lead);
}

Tensor binarize(const Tensor& x, double tau) { return (x > tau).to(x.scalar_type()); }

BBox compute_bbox(const Tensor& mask_binary, double expansion_ratio, int64_t grid_h, int64_t grid_w) {
    int64_t lead = 0;
    Tensor m = as_nchw(mask_binary.detach(), &lead);
    TORCH_CHECK(m.size(0) == 1 && m.size(1) == 1, "compute_bbox expects a single-channel mask");
    m = upsample_nearest(m, grid_h, grid_w).squeeze(0).squeeze(0);

    // Axis sums; first/last nonzero entries bound the joint box of all objects.
    Tensor col_sum = m.sum(0);  // length W
    Tensor row_sum = m.sum(1);  // length H
    Tensor cols = (col_sum > 0).nonzero();
    Tensor rows = (row_sum > 0).nonzero();

    BBox box;
    box.expansion_ratio = expansion_ratio;
    if (cols.numel() == 0 || rows.numel() == 0) {
        box.x_min = 0;
        box.y_min = 0;
        box.x_max = grid_w - 1;
        box.y_max = grid_h - 1;
        box.fallback = true;
        box.expanded = true;
        return box;
    }
    int64_t x_min = cols[0].item<int64_t>();
    int64_t x_max = cols[cols.size(0) - 1].item<int64_t>();
    int64_t y_min = rows[0].item<int64_t>();
    int64_t y_max = rows[rows.size(0) - 1].item<int64_t>();

    double xc = 0.5 * static_cast<double>(x_min + x_max);
    double yc = 0.5 * static_cast<double>(y_min + y_max);
    double l = static_cast<double>(std::max(y_max - y_min, x_max - x_min));
    double half = 0.5 * expansion_ratio * l;

    // Floor the min edges, ceil the max edges: never shrink below the extent.
    box.x_min = std::max<int64_t>(0, static_cast<int64_t>(std::floor(xc - half)));
    box.y_min = std::max<int64_t>(0, static_cast<int64_t>(std::floor(yc - half)));
    box.x_max = std::min<int64_t>(grid_w - 1, static_cast<int64_t>(std::ceil(xc + half)));
    box.y_max = std::min<int64_t>(grid_h - 1, static_cast<int64_t>(std::ceil(yc + half)));
    box.expanded = true;
    return box;
}

Tensor crop_resize(const Tensor& features, const BBox& box, int64_t size) {
    int64_t lead = 0;
    Tensor x = as_nchw(features, &lead);
    TORCH_CHECK(box.x_min >= 0 && box.y_min >= 0 && box.x_max < x.size(3) && box.y_max < x.size(2),
                "crop_resize: box ", box.to_string(), " exceeds the ", x.size(2), "x", x.size(3),
                " grid");
    Tensor patch = x.slice(2, box.y_min, box.y_max + 1).slice(3, box.x_min, box.x_max + 1);
    return from_nchw(upsample_bilinear(patch, size, size), lead);
}

Tensor restore(const Tensor& patch, const BBox& box, int64_t canvas_h, int64_t canvas_w) {
    int64_t lead = 0;
    Tensor x = as_nchw(patch, &lead);
    Tensor fitted = upsample_bilinear(x, box.height(), box.width());
    // Zero-pad out to the canvas; keeps the write differentiable and the
    // outside exactly zero.
    Tensor canvas = torch::constant_pad_nd(
        fitted,
        {box.x_min, canvas_w - 1 - box.x_max, box.y_min, canvas_h - 1 - box.y_max}, 0);
    return from_nchw(canvas, lead);
}

}  // namespace tristage
