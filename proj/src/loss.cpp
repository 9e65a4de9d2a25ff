#include "tristage/loss.hpp"

namespace tristage {

Tensor weight_map(const Tensor& target, int64_t pool, double coef) {
    Tensor g = target.detach();
    Tensor local = avg_pool_clipped(g, pool, 1, pool / 2);
    return 1.0 + coef * (local - g).abs();
}

Tensor hybrid_loss(const Tensor& pred, const Tensor& target, MapForm form, const Tensor& weights) {
    TORCH_CHECK(pred.sizes() == target.sizes(), "prediction/target shape mismatch: ", pred.sizes(),
                " vs ", target.sizes());
    Tensor w = weights;
    Tensor bce_map, p;
    if (form == MapForm::Logits) {
        bce_map = torch::binary_cross_entropy_with_logits(pred, target, {}, {},
                                                          torch::Reduction::None);
        p = torch::sigmoid(pred);
    } else {
        bce_map = torch::binary_cross_entropy(pred, target, {}, torch::Reduction::None);
        p = pred;
    }
    auto dims = std::vector<int64_t>{1, 2, 3};
    Tensor wbce = (w * bce_map).sum(dims) / w.sum(dims);
    Tensor inter = (w * p * target).sum(dims);
    Tensor uni = (w * (p + target)).sum(dims);
    Tensor wiou = 1.0 - (inter + 1.0) / (uni - inter + 1.0);
    return (wbce + wiou).mean();
}

Tensor hybrid_loss(const Tensor& pred, const Tensor& target, MapForm form) {
    return hybrid_loss(pred, target, form, weight_map(target));
}

Tensor mask_target_at(const Tensor& g, int64_t h, int64_t w) { return upsample_nearest(g, h, w); }

Tensor edge_target_at(const Tensor& g_at_res, const LossOptions& opts) {
    Tensor e = derive_boundary(g_at_res);
    return opts.soft_edge_targets ? e : binarize(e, opts.edge_gt_threshold);
}

double LossBreakdown::total_value() const {
    double s = 0.0;
    for (const auto& t : terms) s += t.value;
    return s;
}

namespace {

struct TermAccumulator {
    const LossOptions& opts;
    const Tensor& g_full;
    LossBreakdown out;

    void add(const std::string& name, const Tensor& pred_in, MapForm form, bool boundary) {
        Tensor pred = pred_in;
        Tensor g_res;
        if (opts.at_image_resolution) {
            pred = upsample_bilinear(pred, g_full.size(-2), g_full.size(-1));
            g_res = g_full;
        } else {
            g_res = mask_target_at(g_full, pred.size(-2), pred.size(-1));
        }
        Tensor target = boundary ? edge_target_at(g_res, opts) : g_res;
        Tensor w = weight_map(target, opts.weight_pool, opts.weight_coef);
        Tensor term = hybrid_loss(pred, target, form, w);
        out.terms.push_back({name, term.item<double>()});
        out.total = out.total.defined() ? out.total + term : term;
    }
};

}  // namespace

LossBreakdown total_loss(const StageOutputs& so, const Tensor& g, const LossOptions& opts) {
    TORCH_CHECK(g.dim() == 4 && g.size(1) == 1, "ground truth must be (N,1,H,W)");
    TORCH_CHECK(g.size(-2) == so.input_h && g.size(-1) == so.input_w,
                "ground truth resolution must match the model input");
    TermAccumulator acc{opts, g, {}};

    int64_t h4 = so.m2.size(-2), w4 = so.m2.size(-1);
    int64_t n = g.size(0);

    acc.add("mask.m1", so.m1, MapForm::Logits, false);
    for (int level = 0; level < 3; ++level) {
        Tensor restored;
        if (level == 0) {
            restored = so.m2;  // level 3 is already the restored canvas
        } else {
            std::vector<Tensor> rs;
            Tensor probs = torch::sigmoid(so.cm[level]);
            for (int64_t i = 0; i < n; ++i) rs.push_back(restore(probs[i], so.boxes[i], h4, w4));
            restored = torch::stack(rs);
        }
        acc.add("mask.rst" + std::to_string(level + 3), restored, MapForm::Probabilities, false);
    }
    acc.add("mask.m3", so.m3, MapForm::Logits, false);

    acc.add("edge.e1", so.e1, MapForm::Logits, true);
    for (int level = 0; level < 3; ++level) {
        Tensor restored;
        if (level == 0) {
            restored = so.e2;
        } else {
            std::vector<Tensor> rs;
            Tensor probs = torch::sigmoid(so.ce[level]);
            for (int64_t i = 0; i < n; ++i) rs.push_back(restore(probs[i], so.boxes[i], h4, w4));
            restored = torch::stack(rs);
        }
        acc.add("edge.rst" + std::to_string(level + 3), restored, MapForm::Probabilities, true);
    }
    acc.add("edge.e3", so.e3, MapForm::Logits, true);
    return std::move(acc.out);
}

}  // namespace tristage
