#include "tristage/backbone.hpp"

namespace tristage {

int64_t halved(int64_t v, int64_t times) {
    for (int64_t i = 0; i < times; ++i) v = (v + 1) / 2;
    return v;
}

BottleneckImpl::BottleneckImpl(int64_t in, int64_t out, int64_t stride, Norm norm_kind) {
    int64_t mid = out / 4;
    conv1 = register_module(
        "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, mid, 1).bias(false)));
    bn1 = make_norm(norm_kind, mid);
    if (!bn1.is_empty()) register_module("bn1", bn1.ptr());
    conv2 = register_module(
        "conv2",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(mid, mid, 3).stride(stride).padding(1).bias(false)));
    bn2 = make_norm(norm_kind, mid);
    if (!bn2.is_empty()) register_module("bn2", bn2.ptr());
    conv3 = register_module(
        "conv3", torch::nn::Conv2d(torch::nn::Conv2dOptions(mid, out, 1).bias(false)));
    bn3 = make_norm(norm_kind, out);
    if (!bn3.is_empty()) register_module("bn3", bn3.ptr());

    has_downsample = stride != 1 || in != out;
    if (has_downsample) {
        ds_conv = register_module(
            "downsample_conv",
            torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)));
        ds_norm = make_norm(norm_kind, out);
        if (!ds_norm.is_empty()) register_module("downsample_norm", ds_norm.ptr());
    }
}

Tensor BottleneckImpl::forward(const Tensor& x) {
    Tensor y = run_conv(conv1, x);
    if (!bn1.is_empty()) y = bn1.forward(y);
    y = torch::relu(y);
    y = run_conv(conv2, y);
    if (!bn2.is_empty()) y = bn2.forward(y);
    y = torch::relu(y);
    y = run_conv(conv3, y);
    if (!bn3.is_empty()) y = bn3.forward(y);
    Tensor identity = x;
    if (has_downsample) {
        identity = run_conv(ds_conv, x);
        if (!ds_norm.is_empty()) identity = ds_norm.forward(identity);
    }
    return torch::relu(y + identity);
}

namespace {

torch::nn::Sequential make_stage(int64_t in, int64_t out, int64_t blocks, int64_t stride,
                                 Norm norm_kind) {
    torch::nn::Sequential seq;
    seq->push_back(Bottleneck(in, out, stride, norm_kind));
    for (int64_t i = 1; i < blocks; ++i) seq->push_back(Bottleneck(out, out, 1, norm_kind));
    return seq;
}

}  // namespace

StemImpl::StemImpl(const BackboneConfig& cfg, Norm norm_kind) {
    cfg.validate();
    conv1 = register_module(
        "conv1",
        torch::nn::Conv2d(torch::nn::Conv2dOptions(3, cfg.stage_channels[0], 7).stride(2).padding(3).bias(
            false)));
    bn1 = make_norm(norm_kind, cfg.stage_channels[0]);
    if (!bn1.is_empty()) register_module("bn1", bn1.ptr());
    layer1 = register_module(
        "layer1",
        make_stage(cfg.stage_channels[0], cfg.stage_channels[1], cfg.stage_blocks[1], 1, norm_kind));
}

Tensor StemImpl::forward(const Tensor& image) {
    TORCH_CHECK(image.dim() == 4 && image.size(1) == 3, "stem expects (N,3,H,W) input");
    int64_t h = image.size(2), w = image.size(3);
    if (h < 32 || w < 32 || h % 32 != 0 || w % 32 != 0)
        throw SizingError("input size " + std::to_string(h) + "x" + std::to_string(w) +
                          " rejected: height and width must be multiples of 32 (and at least 32)");
    Tensor f1 = torch::relu(bn1.is_empty() ? run_conv(conv1, image)
                                           : bn1.forward(run_conv(conv1, image)));
    // f1 is not retained past this point.
    Tensor x = torch::max_pool2d(f1, 3, 2, 1);
    return layer1->forward(x);
}

LeafImpl::LeafImpl(const BackboneConfig& cfg, Norm norm_kind) {
    cfg.validate();
    layer2 = register_module(
        "layer2",
        make_stage(cfg.stage_channels[1], cfg.stage_channels[2], cfg.stage_blocks[2], 2, norm_kind));
    layer3 = register_module(
        "layer3",
        make_stage(cfg.stage_channels[2], cfg.stage_channels[3], cfg.stage_blocks[3], 2, norm_kind));
    layer4 = register_module(
        "layer4",
        make_stage(cfg.stage_channels[3], cfg.stage_channels[4], cfg.stage_blocks[4], 2, norm_kind));
}

LeafOutput LeafImpl::forward(const Tensor& x) {
    LeafOutput out;
    out.f3 = layer2->forward(x);
    out.f4 = layer3->forward(out.f3);
    out.f5 = layer4->forward(out.f4);
    return out;
}

LeafOutput pool_then_leaf(Leaf& leaf, const Tensor& f2) {
    if (f2.size(-2) < 8 || f2.size(-1) < 8)
        throw SizingError("stem feature " + std::to_string(f2.size(-2)) + "x" +
                          std::to_string(f2.size(-1)) + " is too small: need at least 8x8");
    Tensor pooled = torch::max_pool2d(f2, {2, 2}, {2, 2}, {0, 0}, {1, 1}, /*ceil_mode=*/true);
    return leaf->forward(pooled);
}

LeafOutput leaf2_forward(Leaf& leaf, const Tensor& cropped) {
    int64_t s = cropped.size(-1);
    if (cropped.size(-2) != s || s % 8 != 0)
        throw SizingError("crop feature must be square with side divisible by 8, got " +
                          std::to_string(cropped.size(-2)) + "x" + std::to_string(s));
    return leaf->forward(cropped);
}

BifurcatedBackboneImpl::BifurcatedBackboneImpl(const BackboneConfig& cfg, Norm norm_kind) {
    stem = register_module("stem", Stem(cfg, norm_kind));
    leaf1 = register_module("leaf1", Leaf(cfg, norm_kind));
    leaf2 = register_module("leaf2", Leaf(cfg, norm_kind));
}

}  // namespace tristage
