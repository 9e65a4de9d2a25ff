#include "tristage/bem.hpp"

namespace tristage {

ChannelAttentionImpl::ChannelAttentionImpl(int64_t channels, int64_t reduction) {
    int64_t hidden = std::max<int64_t>(1, channels / reduction);
    fc1 = register_module("fc1", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, hidden, 1)));
    fc2 = register_module("fc2", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, channels, 1)));
}

Tensor ChannelAttentionImpl::forward(const Tensor& f) {
    Tensor pooled = torch::adaptive_avg_pool2d(f, {1, 1});
    return torch::sigmoid(run_conv(fc2, torch::relu(run_conv(fc1, pooled))));
}

SpatialAttentionImpl::SpatialAttentionImpl() {
    conv = register_module("conv",
                           torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 1, 7).padding(3)));
}

Tensor SpatialAttentionImpl::forward(const Tensor& f) {
    Tensor pooled = f.mean(/*dim=*/1, /*keepdim=*/true);
    return torch::sigmoid(run_conv(conv, pooled));
}

BemImpl::BemImpl(BemOptions o) : opts(o) {
    int64_t c = opts.channels;
    int64_t fuse_in = opts.single_conv ? c : (opts.edge_concat ? c + 1 : c);
    fuse = register_module(
        "fuse", ConvUnit(ConvUnitOptions(fuse_in, c, 3).with_norm(opts.norm).with_relu()));
    if (!opts.single_conv) {
        ca = register_module("ca", ChannelAttention(c, opts.ca_reduction));
        sa = register_module("sa", SpatialAttention());
    }
    mask1 = register_module("mask1",
                            ConvUnit(ConvUnitOptions(c, c, 3).with_norm(opts.norm).with_relu()));
    mask2 = register_module("mask2",
                            ConvUnit(ConvUnitOptions(c, c, 3).with_norm(opts.norm).with_relu()));
    mask3 = register_module("mask3", torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 1, 3).padding(1)));
    edge_head = register_module("edge_head",
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(c, 1, 3).padding(1)));
}

BemOutput BemImpl::forward(const Tensor& f_low, const c10::optional<Tensor>& f_high,
                           const Tensor& edge_in) {
    if (edge_in.size(-2) != f_low.size(-2) || edge_in.size(-1) != f_low.size(-1))
        throw SizingError("edge map " + std::to_string(edge_in.size(-2)) + "x" +
                          std::to_string(edge_in.size(-1)) + " does not match the feature grid " +
                          std::to_string(f_low.size(-2)) + "x" + std::to_string(f_low.size(-1)) +
                          "; upsample it to the feature resolution first");
    Tensor base = f_low;
    if (f_high.has_value()) {
        if (f_high->size(-2) != f_low.size(-2) || f_high->size(-1) != f_low.size(-1))
            throw SizingError("f_high does not match the f_low grid; upsample it first");
        base = f_low + *f_high;
    }

    Tensor f_out;
    if (opts.single_conv) {
        f_out = fuse->forward(base);
    } else {
        Tensor f = opts.edge_concat ? fuse->forward(torch::cat({edge_in, base}, 1))
                                    : fuse->forward(base);
        Tensor f_ca = ca->forward(f) * f;
        f_out = sa->forward(f_ca) * f_ca;
    }

    BemOutput out;
    out.refined = f_out;
    out.edge_logits = run_conv(edge_head, f_out);
    out.mask_logits = run_conv(mask3, mask2->forward(mask1->forward(f_out)));
    return out;
}

}  // namespace tristage
