#pragma once

#include <vector>

#include "tristage/config.hpp"

namespace tristage {

// Multi-scale feature enhancement: parallel non-local, shortcut and serial
// pooled-conv blocks summed element-wise. Accepts any input width; every
// block starts with a 1x1 reduction to out_channels.
struct MfemOptions {
    int64_t in_channels = 64;
    int64_t out_channels = 64;
    int64_t qk_channels = 16;
    std::vector<int64_t> pool_sizes{8, 4, 2, 1};
    int64_t dilation = 2;
    bool use_nonlocal = false;
    int64_t nonlocal_max_positions = 4096;
    Norm norm = Norm::None;

    enum class Mode { Full, Parallel, SingleConv };
    Mode mode = Mode::Full;

    MfemOptions(int64_t in, int64_t out) : in_channels(in), out_channels(out) {}
    MfemOptions& with_qk(int64_t q) { qk_channels = q; return *this; }
    MfemOptions& with_pools(std::vector<int64_t> p) { pool_sizes = std::move(p); return *this; }
    MfemOptions& with_dilation(int64_t d) { dilation = d; return *this; }
    MfemOptions& with_nonlocal(bool on, int64_t max_positions = 4096) {
        use_nonlocal = on;
        nonlocal_max_positions = max_positions;
        return *this;
    }
    MfemOptions& with_norm(Norm n) { norm = n; return *this; }
    MfemOptions& with_mode(Mode m) { mode = m; return *this; }
};

struct MfemImpl : torch::nn::Module {
    explicit MfemImpl(MfemOptions opts);

    Tensor forward(const Tensor& f_in);

    // Spatial self-attention over all positions; refuses maps with more than
    // nonlocal_max_positions positions. The attention matrix S = softmax(Q^T K)
    // is normalized along its first index, so every column sums to 1 and
    // output position j mixes values with the weights in column j.
    Tensor nonlocal_block(const Tensor& f_in);

    // Serial branches: branch 1 pools by pool_sizes[0], each later branch adds
    // the previous (upsampled) branch output to its own reduced input before
    // pooling with the next smaller window. Pool size 1 is the identity.
    Tensor conv_block(const Tensor& f_in);

    MfemOptions opts;

    ConvUnit shortcut{nullptr};
    ConvUnit nl_reduce{nullptr};
    torch::nn::Conv2d nl_q{nullptr}, nl_k{nullptr}, nl_v{nullptr};
    std::vector<ConvUnit> reduces, convs, dilateds;
    ConvUnit single{nullptr};  // Mode::SingleConv replacement
};
TORCH_MODULE(Mfem);

// MfemOptions derived from a ModelConfig for a block with the given input
// width; `deepest` enables the non-local block.
MfemOptions mfem_options_from(const ModelConfig& cfg, int64_t in_channels, bool deepest);

}  // namespace tristage
