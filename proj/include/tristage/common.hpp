#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace tristage {

using torch::Tensor;

// Error taxonomy; the CLI maps these onto exit codes (usage/config=1, data=2, numeric=3).
struct SizingError : std::runtime_error {
    explicit SizingError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Norm { None, Batch, Group };

Norm norm_from_string(const std::string& s);
std::string norm_to_string(Norm n);

// Largest group count <= 4 that divides the channel count.
int64_t group_count_for(int64_t channels);

// ---------------------------------------------------------------------------
// Multiply-accumulate accounting. A MacScope activates a thread-local counter;
// every ConvUnit / counted conv / attention matmul executed while one is alive
// adds its MAC count. Norms, activations, pools and resamplers are not counted.
// ---------------------------------------------------------------------------
class MacScope {
public:
    MacScope();
    ~MacScope();
    MacScope(const MacScope&) = delete;
    MacScope& operator=(const MacScope&) = delete;
    int64_t total() const;

private:
    int64_t saved_;
};

void add_macs(int64_t n);
bool mac_counting_active();

// Runs a conv and, when counting is active, charges in_c/groups * k*k * out_c * out_hw.
Tensor run_conv(torch::nn::Conv2d& conv, const Tensor& x);

// ---------------------------------------------------------------------------
// ConvUnit: conv + optional norm + optional ReLU. Plain conv (no norm, no act)
// is used for prediction heads and attention projections.
// ---------------------------------------------------------------------------
struct ConvUnitOptions {
    int64_t in = 0;
    int64_t out = 0;
    int64_t kernel = 3;
    int64_t stride = 1;
    int64_t padding = -1;  // -1: same-style padding (dilation*(k-1)/2)
    int64_t dilation = 1;
    Norm norm = Norm::None;
    bool relu = false;

    ConvUnitOptions(int64_t in_c, int64_t out_c, int64_t k) : in(in_c), out(out_c), kernel(k) {}
    ConvUnitOptions& with_stride(int64_t s) { stride = s; return *this; }
    ConvUnitOptions& with_padding(int64_t p) { padding = p; return *this; }
    ConvUnitOptions& with_dilation(int64_t d) { dilation = d; return *this; }
    ConvUnitOptions& with_norm(Norm n) { norm = n; return *this; }
    ConvUnitOptions& with_relu(bool r = true) { relu = r; return *this; }
};

struct ConvUnitImpl : torch::nn::Module {
    explicit ConvUnitImpl(ConvUnitOptions opts);
    Tensor forward(const Tensor& x);

    torch::nn::Conv2d conv{nullptr};
    torch::nn::AnyModule norm;
    bool relu = false;
};
TORCH_MODULE(ConvUnit);

// A norm layer for `channels` channels; empty AnyModule for Norm::None.
torch::nn::AnyModule make_norm(Norm kind, int64_t channels);

// Optional capture point for intermediate feature maps (montage plotting).
struct FeatureTap {
    std::map<std::string, Tensor> maps;
    void put(const std::string& name, const Tensor& t) { maps[name] = t.detach(); }
};

// ---------------------------------------------------------------------------
// Resampling helpers. Bilinear everywhere except binary masks (nearest).
// align_corners=false throughout.
// ---------------------------------------------------------------------------
Tensor upsample_bilinear(const Tensor& x, int64_t h, int64_t w);
Tensor upsample_nearest(const Tensor& x, int64_t h, int64_t w);

// Average pool normalizing by the true (clipped) window overlap, so pooling a
// constant map returns the constant exactly, including at borders.
Tensor avg_pool_clipped(const Tensor& x, int64_t kernel, int64_t stride, int64_t padding,
                        bool ceil_mode = false);

}  // namespace tristage
