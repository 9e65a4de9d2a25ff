#include "tristage/metrics.hpp"

#include <cmath>
#include <limits>

namespace tristage {

namespace metrics_detail {

Grid to_grid(const Tensor& t) {
    Tensor x = t.detach().to(torch::kFloat64).contiguous();
    TORCH_CHECK(x.dim() >= 2, "metric inputs need at least 2 dims");
    while (x.dim() > 2) {
        TORCH_CHECK(x.size(0) == 1, "metric inputs must be single maps, got ", t.sizes());
        x = x.squeeze(0);
    }
    Grid g;
    g.h = x.size(0);
    g.w = x.size(1);
    g.v.assign(x.data_ptr<double>(), x.data_ptr<double>() + g.h * g.w);
    return g;
}

void distance_to_foreground(const std::vector<char>& fg, int64_t h, int64_t w,
                            std::vector<double>* dist, std::vector<int64_t>* nearest) {
    const double inf = std::numeric_limits<double>::infinity();
    // Pass 1: per column, nearest foreground row (tie -> smaller row).
    std::vector<double> col_d(h * w, inf);
    std::vector<int64_t> col_src(h * w, -1);
    for (int64_t c = 0; c < w; ++c) {
        int64_t last = -1;
        for (int64_t r = 0; r < h; ++r) {
            if (fg[r * w + c]) last = r;
            if (last >= 0) {
                col_d[r * w + c] = static_cast<double>(r - last);
                col_src[r * w + c] = last;
            }
        }
        last = -1;
        for (int64_t r = h - 1; r >= 0; --r) {
            if (fg[r * w + c]) last = r;
            if (last >= 0 && static_cast<double>(last - r) < col_d[r * w + c]) {
                col_d[r * w + c] = static_cast<double>(last - r);
                col_src[r * w + c] = last;
            }
        }
    }
    // Pass 2: scan columns left to right, keep strictly smaller distances so
    // ties settle on the smallest column.
    dist->assign(h * w, inf);
    nearest->assign(h * w, -1);
    for (int64_t r = 0; r < h; ++r) {
        for (int64_t c = 0; c < w; ++c) {
            double best = inf;
            int64_t best_idx = -1;
            for (int64_t j = 0; j < w; ++j) {
                if (col_src[r * w + j] < 0) continue;
                double dx = static_cast<double>(c - j);
                double d2 = dx * dx + col_d[r * w + j] * col_d[r * w + j];
                if (d2 < best) {
                    best = d2;
                    best_idx = col_src[r * w + j] * w + j;
                }
            }
            (*dist)[r * w + c] = best == inf ? inf : std::sqrt(best);
            (*nearest)[r * w + c] = best_idx;
        }
    }
}

}  // namespace metrics_detail

using metrics_detail::Grid;
using metrics_detail::to_grid;

namespace {

constexpr double kEps = 2.220446049250313e-16;

std::vector<char> binarize_gt(const Grid& g) {
    std::vector<char> out(g.v.size());
    for (size_t i = 0; i < g.v.size(); ++i) out[i] = g.v[i] > 0.5 ? 1 : 0;
    return out;
}

void check_shapes(const Grid& p, const Grid& g) {
    if (p.h != g.h || p.w != g.w)
        throw DataError("prediction " + std::to_string(p.h) + "x" + std::to_string(p.w) +
                        " does not match ground truth " + std::to_string(g.h) + "x" +
                        std::to_string(g.w));
}

double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// --- structural measure pieces ------------------------------------------

double object_score(const std::vector<double>& region_values) {
    if (region_values.empty()) return 0.0;
    double x = mean_of(region_values);
    double var = 0.0;
    for (double v : region_values) var += (v - x) * (v - x);
    double n = static_cast<double>(region_values.size());
    double sigma = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

double region_ssim(const Grid& p, const std::vector<char>& g, int64_t r0, int64_t r1, int64_t c0,
                   int64_t c1) {
    int64_t n = (r1 - r0) * (c1 - c0);
    if (n <= 0) return 0.0;  // weight is zero for empty quadrants
    double xm = 0, ym = 0;
    for (int64_t r = r0; r < r1; ++r)
        for (int64_t c = c0; c < c1; ++c) {
            xm += p.at(r, c);
            ym += g[r * p.w + c];
        }
    double dn = static_cast<double>(n);
    xm /= dn;
    ym /= dn;
    double sx = 0, sy = 0, sxy = 0;
    for (int64_t r = r0; r < r1; ++r)
        for (int64_t c = c0; c < c1; ++c) {
            double dx = p.at(r, c) - xm;
            double dy = g[r * p.w + c] - ym;
            sx += dx * dx;
            sy += dy * dy;
            sxy += dx * dy;
        }
    double denom_n = dn - 1.0 + kEps;
    sx /= denom_n;
    sy /= denom_n;
    sxy /= denom_n;
    double alpha = 4.0 * xm * ym * sxy;
    double beta = (xm * xm + ym * ym) * (sx + sy);
    if (alpha != 0.0) return alpha / (beta + kEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

}  // namespace

double mae(const Tensor& pred, const Tensor& gt) {
    Grid p = to_grid(pred), g = to_grid(gt);
    check_shapes(p, g);
    auto gb = binarize_gt(g);
    double s = 0;
    for (size_t i = 0; i < p.v.size(); ++i) s += std::abs(p.v[i] - static_cast<double>(gb[i]));
    return s / static_cast<double>(p.v.size());
}

double s_measure(const Tensor& pred, const Tensor& gt) {
    Grid p = to_grid(pred), g = to_grid(gt);
    check_shapes(p, g);
    auto gb = binarize_gt(g);
    double area = 0;
    for (char c : gb) area += c;
    double n = static_cast<double>(gb.size());
    double y = area / n;
    if (y == 0.0) return 1.0 - mean_of(p.v);
    if (y == 1.0) return mean_of(p.v);

    // object term: foreground values on G, inverted values off G
    std::vector<double> fg_vals, bg_vals;
    for (size_t i = 0; i < gb.size(); ++i)
        (gb[i] ? fg_vals : bg_vals).push_back(gb[i] ? p.v[i] : 1.0 - p.v[i]);
    double s_o = y * object_score(fg_vals) + (1.0 - y) * object_score(bg_vals);

    // region term: split both maps at the foreground centroid (1-based round)
    double cx_acc = 0, cy_acc = 0;
    for (int64_t r = 0; r < g.h; ++r)
        for (int64_t c = 0; c < g.w; ++c)
            if (gb[r * g.w + c]) {
                cx_acc += static_cast<double>(c + 1);
                cy_acc += static_cast<double>(r + 1);
            }
    int64_t cx = std::llround(cx_acc / area);
    int64_t cy = std::llround(cy_acc / area);
    cx = std::max<int64_t>(1, std::min<int64_t>(g.w, cx));
    cy = std::max<int64_t>(1, std::min<int64_t>(g.h, cy));
    double w1 = static_cast<double>(cx * cy) / n;
    double w2 = static_cast<double>((g.w - cx) * cy) / n;
    double w3 = static_cast<double>(cx * (g.h - cy)) / n;
    double w4 = 1.0 - w1 - w2 - w3;
    double s_r = w1 * region_ssim(p, gb, 0, cy, 0, cx) + w2 * region_ssim(p, gb, 0, cy, cx, g.w) +
                 w3 * region_ssim(p, gb, cy, g.h, 0, cx) +
                 w4 * region_ssim(p, gb, cy, g.h, cx, g.w);

    double s = 0.5 * s_o + 0.5 * s_r;
    return s < 0.0 ? 0.0 : s;
}

double e_measure_mean(const Tensor& pred, const Tensor& gt) {
    Grid p = to_grid(pred), g = to_grid(gt);
    check_shapes(p, g);
    auto gb = binarize_gt(g);
    double area = 0;
    for (char c : gb) area += c;
    double n = static_cast<double>(gb.size());
    double mu_g = area / n;

    double acc = 0.0;
    for (int t = 0; t < 256; ++t) {
        double thr = static_cast<double>(t) / 256.0;
        double mu_f = 0;
        for (size_t i = 0; i < p.v.size(); ++i) mu_f += p.v[i] > thr ? 1.0 : 0.0;
        mu_f /= n;
        double e_t = 0.0;
        if (area == 0.0) {
            for (size_t i = 0; i < p.v.size(); ++i) e_t += p.v[i] > thr ? 0.0 : 1.0;
            e_t /= n;
        } else if (area == n) {
            e_t = mu_f;
        } else {
            double sum_enh = 0.0;
            for (size_t i = 0; i < p.v.size(); ++i) {
                double dfm = (p.v[i] > thr ? 1.0 : 0.0) - mu_f;
                double dgt = static_cast<double>(gb[i]) - mu_g;
                double align = 2.0 * dfm * dgt / (dfm * dfm + dgt * dgt + kEps);
                sum_enh += (align + 1.0) * (align + 1.0) / 4.0;
            }
            e_t = sum_enh / n;
        }
        acc += e_t;
    }
    return acc / 256.0;
}

double weighted_f(const Tensor& pred, const Tensor& gt) {
    Grid p = to_grid(pred), g = to_grid(gt);
    check_shapes(p, g);
    auto gb = binarize_gt(g);
    int64_t h = g.h, w = g.w;
    double area = 0;
    for (char c : gb) area += c;
    if (area == 0.0) return 0.0;

    std::vector<double> err(p.v.size());
    for (size_t i = 0; i < p.v.size(); ++i) err[i] = std::abs(p.v[i] - static_cast<double>(gb[i]));

    std::vector<double> dist;
    std::vector<int64_t> nearest;
    metrics_detail::distance_to_foreground(gb, h, w, &dist, &nearest);

    std::vector<double> err_t = err;
    for (size_t i = 0; i < err.size(); ++i)
        if (!gb[i] && nearest[i] >= 0) err_t[i] = err[nearest[i]];

    // 7x7 Gaussian (sigma 5) correlation with zero padding
    double kernel[7][7];
    double ksum = 0;
    for (int a = -3; a <= 3; ++a)
        for (int b = -3; b <= 3; ++b) {
            kernel[a + 3][b + 3] = std::exp(-(a * a + b * b) / 50.0);
            ksum += kernel[a + 3][b + 3];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;
    std::vector<double> ea(err.size(), 0.0);
    for (int64_t r = 0; r < h; ++r)
        for (int64_t c = 0; c < w; ++c) {
            double s = 0;
            for (int a = -3; a <= 3; ++a) {
                int64_t rr = r + a;
                if (rr < 0 || rr >= h) continue;
                for (int b = -3; b <= 3; ++b) {
                    int64_t cc = c + b;
                    if (cc < 0 || cc >= w) continue;
                    s += kernel[a + 3][b + 3] * err_t[rr * w + cc];
                }
            }
            ea[r * w + c] = s;
        }

    double fg_err_sum = 0, bg_err_sum = 0;
    const double decay = std::log(0.5) / 5.0;
    for (size_t i = 0; i < err.size(); ++i) {
        double min_e = err[i];
        if (gb[i] && ea[i] < err[i]) min_e = ea[i];
        double b = gb[i] ? 1.0 : 2.0 - std::exp(decay * dist[i]);
        double ew = min_e * b;
        (gb[i] ? fg_err_sum : bg_err_sum) += ew;
    }
    double tpw = area - fg_err_sum;
    double fpw = bg_err_sum;
    double recall = 1.0 - fg_err_sum / area;
    double precision = tpw / (kEps + tpw + fpw);
    return 2.0 * precision * recall / (kEps + precision + recall);
}

Curves pr_f_curves(const Tensor& pred, const Tensor& gt) {
    Grid p = to_grid(pred), g = to_grid(gt);
    check_shapes(p, g);
    auto gb = binarize_gt(g);
    Curves out;
    for (int t = 0; t < 256; ++t) {
        double thr = static_cast<double>(t) / 256.0;
        int64_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < p.v.size(); ++i) {
            bool b = p.v[i] > thr;
            if (b && gb[i]) ++tp;
            else if (b) ++fp;
            else if (gb[i]) ++fn;
        }
        double prec = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        double rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        double denom = 0.3 * prec + rec;
        out.precision[t] = prec;
        out.recall[t] = rec;
        out.f[t] = denom > 0 ? 1.3 * prec * rec / denom : 0.0;
    }
    return out;
}

Tensor normalize_for_eval(const Tensor& pred) {
    Tensor p = pred.detach().to(torch::kFloat64);
    double mn = p.min().item<double>();
    double mx = p.max().item<double>();
    if (mx > mn) return (p - mn) / (mx - mn);
    return torch::zeros_like(p);
}

Tensor quantize256(const Tensor& pred) {
    return (pred.detach().to(torch::kFloat64) * 255.0).round() / 255.0;
}

MetricSummary evaluate_pair(const Tensor& pred, const Tensor& gt, bool normalize) {
    Tensor p = normalize ? quantize256(normalize_for_eval(pred)) : pred;
    MetricSummary s;
    s.s_m = s_measure(p, gt);
    s.f_w = weighted_f(p, gt);
    s.mae_v = mae(p, gt);
    s.e_m = e_measure_mean(p, gt);
    return s;
}

bool is_small_target(const Tensor& gt, double tau) {
    Grid g = to_grid(gt);
    auto gb = binarize_gt(g);
    double area = 0;
    for (char c : gb) area += c;
    return area / static_cast<double>(gb.size()) < tau;
}

}  // namespace tristage
