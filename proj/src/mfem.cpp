#include "tristage/mfem.hpp"

namespace tristage {

MfemOptions mfem_options_from(const ModelConfig& cfg, int64_t in_channels, bool deepest) {
    MfemOptions o(in_channels, cfg.decoder_channels);
    o.with_qk(cfg.qk_channels)
        .with_pools(cfg.mfem_pool_sizes)
        .with_dilation(cfg.mfem_dilation)
        .with_nonlocal(deepest, cfg.nonlocal_max_positions)
        .with_norm(cfg.norm);
    if (cfg.without_mfem)
        o.with_mode(MfemOptions::Mode::SingleConv);
    else if (cfg.mfem_parallel)
        o.with_mode(MfemOptions::Mode::Parallel);
    return o;
}

MfemImpl::MfemImpl(MfemOptions o) : opts(std::move(o)) {
    if (opts.mode == MfemOptions::Mode::SingleConv) {
        single = register_module(
            "single", ConvUnit(ConvUnitOptions(opts.in_channels, opts.out_channels, 3)
                                   .with_norm(opts.norm)
                                   .with_relu()));
        return;
    }
    shortcut = register_module(
        "shortcut", ConvUnit(ConvUnitOptions(opts.in_channels, opts.out_channels, 1)
                                 .with_norm(opts.norm)
                                 .with_relu()));
    if (opts.use_nonlocal) {
        nl_reduce = register_module(
            "nl_reduce", ConvUnit(ConvUnitOptions(opts.in_channels, opts.out_channels, 1)
                                      .with_norm(opts.norm)
                                      .with_relu()));
        nl_q = register_module(
            "nl_q", torch::nn::Conv2d(torch::nn::Conv2dOptions(opts.out_channels, opts.qk_channels, 1)));
        nl_k = register_module(
            "nl_k", torch::nn::Conv2d(torch::nn::Conv2dOptions(opts.out_channels, opts.qk_channels, 1)));
        nl_v = register_module(
            "nl_v", torch::nn::Conv2d(torch::nn::Conv2dOptions(opts.out_channels, opts.out_channels, 1)));
    }
    for (size_t i = 0; i < opts.pool_sizes.size(); ++i) {
        reduces.push_back(register_module(
            "reduce" + std::to_string(i + 1),
            ConvUnit(ConvUnitOptions(opts.in_channels, opts.out_channels, 1)
                         .with_norm(opts.norm)
                         .with_relu())));
        convs.push_back(register_module(
            "conv" + std::to_string(i + 1),
            ConvUnit(ConvUnitOptions(opts.out_channels, opts.out_channels, 3)
                         .with_norm(opts.norm)
                         .with_relu())));
        dilateds.push_back(register_module(
            "dilated" + std::to_string(i + 1),
            ConvUnit(ConvUnitOptions(opts.out_channels, opts.out_channels, 3)
                         .with_dilation(opts.dilation)
                         .with_norm(opts.norm)
                         .with_relu())));
    }
}

Tensor MfemImpl::nonlocal_block(const Tensor& f_in) {
    int64_t h = f_in.size(-2), w = f_in.size(-1);
    int64_t n = h * w;
    if (n > opts.nonlocal_max_positions)
        throw ConfigError("non-local block invoked on a " + std::to_string(h) + "x" +
                          std::to_string(w) + " map (" + std::to_string(n) +
                          " positions > limit " + std::to_string(opts.nonlocal_max_positions) +
                          "); it is meant for the deepest low-resolution features only");
    Tensor fnl = nl_reduce->forward(f_in);
    int64_t batch = fnl.size(0);
    Tensor q = run_conv(nl_q, fnl).reshape({batch, opts.qk_channels, n});
    Tensor k = run_conv(nl_k, fnl).reshape({batch, opts.qk_channels, n});
    Tensor v = run_conv(nl_v, fnl).reshape({batch, opts.out_channels, n});
    Tensor s = torch::matmul(q.transpose(1, 2), k);  // (N, n, n)
    add_macs(batch * opts.qk_channels * n * n);
    s = torch::softmax(s, /*dim=*/1);
    Tensor out = torch::matmul(v, s);  // (N, C, n)
    add_macs(batch * opts.out_channels * n * n);
    return out.reshape({batch, opts.out_channels, h, w});
}

Tensor MfemImpl::conv_block(const Tensor& f_in) {
    int64_t h = f_in.size(-2), w = f_in.size(-1);
    bool parallel = opts.mode == MfemOptions::Mode::Parallel;
    Tensor acc, prev;
    for (size_t i = 0; i < opts.pool_sizes.size(); ++i) {
        Tensor x = reduces[i]->forward(f_in);
        if (!parallel && prev.defined()) x = x + prev;
        int64_t p = opts.pool_sizes[i];
        if (p > 1) x = avg_pool_clipped(x, p, p, 0, /*ceil_mode=*/true);
        x = dilateds[i]->forward(convs[i]->forward(x));
        x = upsample_bilinear(x, h, w);
        if (parallel)
            acc = acc.defined() ? acc + x : x;
        else
            prev = x;
    }
    return parallel ? acc : prev;
}

Tensor MfemImpl::forward(const Tensor& f_in) {
    if (opts.mode == MfemOptions::Mode::SingleConv) return single->forward(f_in);
    Tensor out = shortcut->forward(f_in) + conv_block(f_in);
    if (opts.use_nonlocal) out = out + nonlocal_block(f_in);
    return out;
}

}  // namespace tristage
