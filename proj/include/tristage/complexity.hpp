#pragma once

#include <vector>

#include "tristage/model.hpp"

namespace tristage {

struct ComplexityReport {
    int64_t params = 0;
    int64_t macs = 0;
    std::vector<std::pair<std::string, int64_t>> macs_by_part;
    double params_m() const { return static_cast<double>(params) / 1e6; }
    double gmacs() const { return static_cast<double>(macs) / 1e9; }
};

// Parameter count plus analytic multiply-accumulates at the configured input
// size, with the crop branch evaluated at the fixed crop_size x crop_size
// resolution (boxes vary at runtime but the crop is always resized to S^2, so
// the count is input-independent). Runs shape-real no-grad forwards of the
// actual modules; counts cover convolutions and attention matrix products.
ComplexityReport analyze_complexity(TriStageNet& model);

}  // namespace tristage
