#include "tristage/common.hpp"

namespace tristage {

Norm norm_from_string(const std::string& s) {
    if (s == "none") return Norm::None;
    if (s == "batch") return Norm::Batch;
    if (s == "group") return Norm::Group;
    throw ConfigError("unknown norm kind '" + s + "' (expected none|batch|group)");
}

std::string norm_to_string(Norm n) {
    switch (n) {
        case Norm::None: return "none";
        case Norm::Batch: return "batch";
        case Norm::Group: return "group";
    }
    return "none";
}

int64_t group_count_for(int64_t channels) {
    for (int64_t g = std::min<int64_t>(4, channels); g > 1; --g) {
        if (channels % g == 0) return g;
    }
    return 1;
}

namespace {
thread_local int64_t g_mac_total = -1;  // -1: counting inactive
}

MacScope::MacScope() : saved_(g_mac_total) { g_mac_total = 0; }
MacScope::~MacScope() { g_mac_total = saved_; }
int64_t MacScope::total() const { return g_mac_total; }

void add_macs(int64_t n) {
    if (g_mac_total >= 0) g_mac_total += n;
}

bool mac_counting_active() { return g_mac_total >= 0; }

Tensor run_conv(torch::nn::Conv2d& conv, const Tensor& x) {
    Tensor y = conv->forward(x);
    if (mac_counting_active()) {
        const auto& o = conv->options;
        int64_t k2 = o.kernel_size()->at(0) * o.kernel_size()->at(1);
        add_macs(o.in_channels() / o.groups() * k2 * o.out_channels() * y.size(-1) * y.size(-2) *
                 y.size(0));
    }
    return y;
}

torch::nn::AnyModule make_norm(Norm kind, int64_t channels) {
    switch (kind) {
        case Norm::None: return {};
        case Norm::Batch: return torch::nn::AnyModule(torch::nn::BatchNorm2d(channels));
        case Norm::Group:
            return torch::nn::AnyModule(
                torch::nn::GroupNorm(torch::nn::GroupNormOptions(group_count_for(channels), channels)));
    }
    return {};
}

ConvUnitImpl::ConvUnitImpl(ConvUnitOptions opts) : relu(opts.relu) {
    int64_t pad = opts.padding >= 0 ? opts.padding : opts.dilation * (opts.kernel - 1) / 2;
    conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(opts.in, opts.out, opts.kernel)
                                                         .stride(opts.stride)
                                                         .padding(pad)
                                                         .dilation(opts.dilation)));
    norm = make_norm(opts.norm, opts.out);
    if (!norm.is_empty()) register_module("norm", norm.ptr());
}

Tensor ConvUnitImpl::forward(const Tensor& x) {
    Tensor y = run_conv(conv, x);
    if (!norm.is_empty()) y = norm.forward(y);
    if (relu) y = torch::relu(y);
    return y;
}

Tensor upsample_bilinear(const Tensor& x, int64_t h, int64_t w) {
    if (x.size(-2) == h && x.size(-1) == w) return x;
    return torch::upsample_bilinear2d(x, {h, w}, /*align_corners=*/false);
}

Tensor upsample_nearest(const Tensor& x, int64_t h, int64_t w) {
    if (x.size(-2) == h && x.size(-1) == w) return x;
    return torch::upsample_nearest2d(x, {h, w});
}

Tensor avg_pool_clipped(const Tensor& x, int64_t kernel, int64_t stride, int64_t padding,
                        bool ceil_mode) {
    return torch::avg_pool2d(x, {kernel, kernel}, {stride, stride}, {padding, padding}, ceil_mode,
                             /*count_include_pad=*/false);
}

}  // namespace tristage
