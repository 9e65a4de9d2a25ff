#include "tristage/model.hpp"

namespace tristage {

Tensor StageOutputs::stage_prob(int decoder) const {
    switch (decoder) {
        case 1: return torch::sigmoid(emitted(m1));
        case 2: return emitted(m2);
        case 3: return torch::sigmoid(emitted(m3));
        default: throw ConfigError("decoder index must be 1, 2 or 3");
    }
}

Dec1HeadImpl::Dec1HeadImpl(const BackboneConfig& bb, int64_t channels, Norm norm) {
    t3 = register_module("t3", ConvUnit(ConvUnitOptions(bb.stage_channels[2], channels, 1)
                                            .with_norm(norm)
                                            .with_relu()));
    t4 = register_module("t4", ConvUnit(ConvUnitOptions(bb.stage_channels[3], channels, 1)
                                            .with_norm(norm)
                                            .with_relu()));
    t5 = register_module("t5", ConvUnit(ConvUnitOptions(bb.stage_channels[4], channels, 1)
                                            .with_norm(norm)
                                            .with_relu()));
    m1_head = register_module(
        "m1_head", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, 1, 3).padding(1)));
}

MfemTrioImpl::MfemTrioImpl(MfemOptions l3o, MfemOptions l4o, MfemOptions l5o) {
    l3 = register_module("l3", Mfem(std::move(l3o)));
    l4 = register_module("l4", Mfem(std::move(l4o)));
    l5 = register_module("l5", Mfem(std::move(l5o)));
}

MfemMonoImpl::MfemMonoImpl(MfemOptions o) { l2 = register_module("l2", Mfem(std::move(o))); }

MfemBankImpl::MfemBankImpl(const ModelConfig& cfg) {
    int64_t d = cfg.decoder_channels;
    const auto& ch = cfg.backbone.stage_channels;
    dec1 = register_module("dec1", MfemTrio(mfem_options_from(cfg, d, false),
                                            mfem_options_from(cfg, d, false),
                                            mfem_options_from(cfg, d, true)));
    dec2 = register_module("dec2", MfemTrio(mfem_options_from(cfg, ch[2], false),
                                            mfem_options_from(cfg, ch[3], false),
                                            mfem_options_from(cfg, ch[4], true)));
    dec3 = register_module("dec3", MfemMono(mfem_options_from(cfg, ch[1], false)));
}

BemBankImpl::BemBankImpl(const ModelConfig& cfg) {
    auto opts = BemOptions(cfg.decoder_channels)
                    .with_reduction(cfg.ca_reduction)
                    .with_norm(cfg.norm)
                    .with_edge_concat(!cfg.without_edge)
                    .with_single_conv(cfg.without_bem);
    l3 = register_module("l3", Bem(opts));
    l4 = register_module("l4", Bem(opts));
    l5 = register_module("l5", Bem(opts));
}

TriStageNetImpl::TriStageNetImpl(ModelConfig c) : cfg(std::move(c)) {
    cfg.validate();
    stem = register_module("stem", Stem(cfg.backbone, cfg.norm));
    leaf1 = register_module("leaf1", Leaf(cfg.backbone, cfg.norm));
    leaf2 = register_module("leaf2", Leaf(cfg.backbone, cfg.norm));
    mfem = register_module("mfem", MfemBank(cfg));
    dec1 = register_module("dec1", Dec1Head(cfg.backbone, cfg.decoder_channels, cfg.norm));
    bem = register_module("bem", BemBank(cfg));
    auto mo = MgfmOptions(cfg.decoder_channels);
    mo.sfm_groups = cfg.sfm_groups;
    mo.ca_reduction = cfg.ca_reduction;
    mo.edge_feature_channels = cfg.edge_feature_channels;
    mo.norm = cfg.norm;
    mo.without_sfm = cfg.without_sfm;
    mo.without_edge = cfg.without_edge;
    mgfm = register_module("mgfm", Mgfm(mo));
}

std::tuple<Tensor, Tensor, Tensor> TriStageNetImpl::decoder1(const LeafOutput& lo) {
    Tensor r5 = mfem->dec1->l5->forward(dec1->t5->forward(lo.f5));
    Tensor r4 = mfem->dec1->l4->forward(
        dec1->t4->forward(lo.f4) + upsample_bilinear(r5, lo.f4.size(-2), lo.f4.size(-1)));
    Tensor r3 = mfem->dec1->l3->forward(
        dec1->t3->forward(lo.f3) + upsample_bilinear(r4, lo.f3.size(-2), lo.f3.size(-1)));
    Tensor m1 = run_conv(dec1->m1_head, r3);
    Tensor e1 = derive_boundary(m1);
    return {m1, e1, r3};
}

Dec2Output TriStageNetImpl::decoder2(const LeafOutput& lo, const Tensor& ce_crop, FeatureTap* tap) {
    Tensor r3 = mfem->dec2->l3->forward(lo.f3);
    Tensor r4 = mfem->dec2->l4->forward(lo.f4);
    Tensor r5 = mfem->dec2->l5->forward(lo.f5);

    Dec2Output out;
    BemOutput b5 = bem->l5->forward(r5, c10::nullopt, ce_crop);
    Tensor e5 = torch::sigmoid(b5.edge_logits);
    BemOutput b4 = bem->l4->forward(r4, upsample_bilinear(b5.refined, r4.size(-2), r4.size(-1)),
                                    upsample_bilinear(e5, r4.size(-2), r4.size(-1)));
    Tensor e4 = torch::sigmoid(b4.edge_logits);
    BemOutput b3 = bem->l3->forward(r3, upsample_bilinear(b4.refined, r3.size(-2), r3.size(-1)),
                                    upsample_bilinear(e4, r3.size(-2), r3.size(-1)));
    if (tap) {
        tap->put("dec2.r3", r3);
        tap->put("dec2.r4_refined", b4.refined);
        tap->put("dec2.r3_refined", b3.refined);
    }
    out.cm = {b3.mask_logits, b4.mask_logits, b5.mask_logits};
    out.ce = {b3.edge_logits, b4.edge_logits, b5.edge_logits};
    out.refined3 = b3.refined;
    return out;
}

StageOutputs TriStageNetImpl::forward(const Tensor& image, FeatureTap* tap) {
    TORCH_CHECK(image.dim() == 4, "forward expects (N,3,H,W)");
    StageOutputs so;
    so.input_h = image.size(2);
    so.input_w = image.size(3);

    Tensor f2 = stem->forward(image);
    int64_t h4 = f2.size(-2), w4 = f2.size(-1);
    LeafOutput lo = pool_then_leaf(leaf1, f2);
    std::tie(so.m1, so.e1, std::ignore) = decoder1(lo);

    std::vector<bool> degenerate;
    so.m1n = normalize_minmax(so.m1, &degenerate);
    so.e1n = normalize_minmax(so.e1);
    so.m1b = binarize(so.m1n);
    so.e1b = binarize(so.e1n);

    int64_t s = cfg.crop_size;
    int64_t s5 = halved(s, 3);
    Tensor e1n_f2 = upsample_bilinear(so.e1n, h4, w4);

    int64_t n = image.size(0);
    std::vector<Tensor> crops, edge_crops;
    so.boxes.reserve(n);
    so.empty_fallback.resize(n);
    for (int64_t i = 0; i < n; ++i) {
        BBox box = compute_bbox(so.m1b[i], cfg.expansion_ratio, h4, w4);
        so.empty_fallback[i] = box.fallback;
        so.boxes.push_back(box);
        crops.push_back(crop_resize(f2[i], box, s));
        edge_crops.push_back(crop_resize(e1n_f2[i], box, s5));
    }
    Tensor f2_crop = torch::stack(crops);
    Tensor ce_crop = torch::stack(edge_crops);

    LeafOutput lo2 = leaf2_forward(leaf2, f2_crop);
    Dec2Output d2 = decoder2(lo2, ce_crop, tap);
    so.cm = d2.cm;
    so.ce = d2.ce;

    std::vector<Tensor> m2s, e2s;
    Tensor cm3 = torch::sigmoid(d2.cm[0]);
    Tensor ce3 = torch::sigmoid(d2.ce[0]);
    for (int64_t i = 0; i < n; ++i) {
        m2s.push_back(restore(cm3[i], so.boxes[i], h4, w4));
        e2s.push_back(restore(ce3[i], so.boxes[i], h4, w4));
    }
    so.m2 = torch::stack(m2s);
    so.e2 = torch::stack(e2s);

    Tensor r2 = mfem->dec3->l2->forward(f2);
    std::tie(so.m3, so.e3) = mgfm->forward(r2, so.m2, so.e2, tap);
    return so;
}

}  // namespace tristage
