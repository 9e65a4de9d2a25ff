#include "tristage/complexity.hpp"

namespace tristage {

ComplexityReport analyze_complexity(TriStageNet& model) {
    ComplexityReport rep;
    for (const auto& p : model->parameters()) rep.params += p.numel();

    const auto& cfg = model->cfg;
    bool was_training = model->is_training();
    model->eval();
    torch::NoGradGuard guard;
    MacScope scope;
    int64_t last = 0;
    auto part = [&](const char* name) {
        rep.macs_by_part.emplace_back(name, scope.total() - last);
        last = scope.total();
    };

    Tensor image = torch::zeros({1, 3, cfg.input_size, cfg.input_size});
    Tensor f2 = model->stem->forward(image);
    part("stem");
    LeafOutput lo = pool_then_leaf(model->leaf1, f2);
    part("leaf1");
    model->decoder1(lo);
    part("decoder1");

    // Crop branch at the fixed resize target.
    Tensor f2_crop = torch::zeros({1, cfg.backbone.stage_channels[1], cfg.crop_size, cfg.crop_size});
    LeafOutput lo2 = leaf2_forward(model->leaf2, f2_crop);
    part("leaf2");
    int64_t s5 = halved(cfg.crop_size, 3);
    model->decoder2(lo2, torch::zeros({1, 1, s5, s5}));
    part("decoder2");

    Tensor r2 = model->mfem->dec3->l2->forward(f2);
    Tensor canvas = torch::zeros({1, 1, f2.size(-2), f2.size(-1)});
    model->mgfm->forward(r2, canvas, canvas);
    part("decoder3");

    rep.macs = scope.total();
    if (was_training) model->train();
    return rep;
}

}  // namespace tristage
