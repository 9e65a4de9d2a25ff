#pragma once

#include <optional>

#include "tristage/data.hpp"
#include "tristage/metrics.hpp"
#include "tristage/model.hpp"

namespace tristage {

struct EvalOptions {
    std::string label = "dataset";
    std::string out_dir;          // empty: nothing written
    bool per_decoder = false;     // add first/second decoder rows
    std::vector<double> small_taus;  // e.g. {1/8., 1/16., 1/32.}
    int64_t workers = 2;
    int64_t batch = 1;
};

struct EvalRow {
    std::string label;
    int64_t count = 0;
    double s_m = 0, f_w = 0, mae_v = 0, e_m = 0;
};

struct PerImageRecord {
    std::string name;
    MetricSummary third;
};

struct EvalResult {
    std::vector<EvalRow> rows;  // first row is always the final-decoder mean
    std::vector<PerImageRecord> per_image;
    Curves mean_curves;  // final decoder, averaged per threshold over images
};

EvalResult evaluate_model(TriStageNet& model, const Dataset& data, const EvalOptions& opts);

// Evaluate already-written prediction maps (pred_dir/<stem>.png) against the
// dataset's ground truth; missing predictions are listed and excluded.
EvalResult evaluate_predictions(const std::string& pred_dir, const Dataset& data,
                                const EvalOptions& opts);

// Small-target subset of a dataset (foreground fraction < tau).
std::vector<size_t> filter_small(const Dataset& data, double tau);

// Inference: prediction maps as 8-bit PNGs mirroring input stems, plus a
// manifest line per sample: <input> <output> x_min y_min x_max y_max [fallback].
void run_inference(TriStageNet& model, const Dataset& data, const std::string& out_dir,
                   int64_t batch = 1);

void write_curves_tsv(const std::string& path_prefix, const Curves& curves);

}  // namespace tristage
