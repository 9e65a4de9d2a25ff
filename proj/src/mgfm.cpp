#include "tristage/mgfm.hpp"

namespace tristage {

SfmImpl::SfmImpl(int64_t channels, int64_t groups, int64_t ca_reduction, Norm norm) {
    if (groups < 1 || channels % groups != 0)
        throw ConfigError("split-fusion needs channels divisible by the group count, got " +
                          std::to_string(channels) + " channels for " + std::to_string(groups) +
                          " groups");
    group_width = channels / groups;
    for (int64_t i = 0; i < groups; ++i) {
        std::string tag = std::to_string(i + 1);
        convs.push_back(register_module(
            "g" + tag + "_conv", ConvUnit(ConvUnitOptions(group_width + 1, group_width, 3)
                                              .with_norm(norm)
                                              .with_relu())));
        sas.push_back(register_module("g" + tag + "_sa", SpatialAttention()));
        cas.push_back(register_module("g" + tag + "_ca", ChannelAttention(group_width, ca_reduction)));
    }
}

Tensor SfmImpl::forward(const Tensor& feature, const Tensor& mask) {
    std::vector<Tensor> outs;
    Tensor prev;
    for (size_t i = 0; i < convs.size(); ++i) {
        Tensor g = feature.narrow(1, static_cast<int64_t>(i) * group_width, group_width);
        if (i > 0) g = g + prev;
        Tensor y = convs[i]->forward(torch::cat({g, mask}, 1));
        y = y * sas[i]->forward(y);   // spatial first,
        y = y * cas[i]->forward(y);   // then channel
        prev = y;
        outs.push_back(y);
    }
    return torch::cat(outs, 1);
}

MgfmImpl::MgfmImpl(MgfmOptions o) : opts(o) {
    int64_t c = opts.channels;
    if (opts.without_sfm)
        fuse_wo_sfm = register_module(
            "fuse_wo_sfm",
            ConvUnit(ConvUnitOptions(c + 1, c, 3).with_norm(opts.norm).with_relu()));
    else
        sfm = register_module("sfm", Sfm(c, opts.sfm_groups, opts.ca_reduction, opts.norm));
    trunk_ca = register_module("trunk_ca", ChannelAttention(c, opts.ca_reduction));
    trunk_sa = register_module("trunk_sa", SpatialAttention());
    edge_conv1 = register_module(
        "edge_conv1",
        ConvUnit(ConvUnitOptions(c, opts.edge_feature_channels, 3).with_norm(opts.norm).with_relu()));
    int64_t e_in = opts.edge_feature_channels + (opts.without_edge ? 0 : 1);
    edge_conv2 = register_module(
        "edge_conv2", ConvUnit(ConvUnitOptions(e_in, c, 3).with_norm(opts.norm).with_relu()));
    res_conv = register_module(
        "res_conv", ConvUnit(ConvUnitOptions(c, c, 3).with_norm(opts.norm).with_relu()));
    mask_head = register_module("mask_head",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 1, 3).padding(1)));
    edge_head = register_module("edge_head",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 1, 3).padding(1)));
}

std::pair<Tensor, Tensor> MgfmImpl::forward(const Tensor& r2, const Tensor& m2, const Tensor& e2,
                                            FeatureTap* tap) {
    if (m2.size(-2) != r2.size(-2) || m2.size(-1) != r2.size(-1) || e2.size(-2) != r2.size(-2) ||
        e2.size(-1) != r2.size(-1))
        throw SizingError("mask/edge canvases must match the stem feature resolution " +
                          std::to_string(r2.size(-2)) + "x" + std::to_string(r2.size(-1)));

    Tensor f_f = opts.without_sfm ? fuse_wo_sfm->forward(torch::cat({r2, m2}, 1))
                                  : sfm->forward(r2, m2);
    Tensor f_ca = f_f * trunk_ca->forward(f_f);   // channel first,
    Tensor f_a = f_ca * trunk_sa->forward(f_ca);  // then spatial
    Tensor b = edge_conv1->forward(f_a);
    Tensor f_e = opts.without_edge ? edge_conv2->forward(b)
                                   : edge_conv2->forward(torch::cat({b, e2}, 1));
    Tensor f_r = f_a + res_conv->forward(f_a + f_e);
    if (tap) {
        tap->put("mgfm.r2", r2);
        tap->put("mgfm.f_f", f_f);
        tap->put("mgfm.f_a", f_a);
        tap->put("mgfm.f_e", f_e);
        tap->put("mgfm.f_r", f_r);
    }
    return {run_conv(mask_head, f_r), run_conv(edge_head, f_e)};
}

}  // namespace tristage
