#pragma once

#include <string>
#include <vector>

#include "tristage/metrics.hpp"
#include "tristage/model.hpp"

namespace tristage {

// Parses a curves TSV written by the evaluator; malformed rows raise DataError.
Curves read_curves_tsv(const std::string& path, bool f_curve);

// Overlays one polyline per input file with a legend. kind: "pr" plots
// recall/precision, "f" plots threshold/F.
void plot_curves(const std::vector<std::string>& files, const std::vector<std::string>& labels,
                 const std::string& kind, const std::string& out_png);

// Tiles the leading channels of the fusion-stage feature maps for one image.
void plot_montage(TriStageNet& model, const std::string& image_path, const std::string& out_png,
                  int64_t channels_per_map = 8);

}  // namespace tristage
