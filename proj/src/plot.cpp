#include "tristage/plot.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fstream>
#include <sstream>

#include "tristage/data.hpp"

namespace tristage {

Curves read_curves_tsv(const std::string& path, bool f_curve) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open curve file '" + path + "'");
    std::string header;
    std::getline(is, header);
    Curves c;
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        int t;
        double a, b;
        if (f_curve) {
            if (!(ls >> t >> a) || t < 0 || t > 255)
                throw DataError("curve file '" + path + "' line " + std::to_string(rows + 2) +
                                ": expected '<threshold> <f>'");
            c.f[t] = a;
        } else {
            if (!(ls >> t >> a >> b) || t < 0 || t > 255)
                throw DataError("curve file '" + path + "' line " + std::to_string(rows + 2) +
                                ": expected '<threshold> <precision> <recall>'");
            c.precision[t] = a;
            c.recall[t] = b;
        }
        ++rows;
    }
    if (rows != 256)
        throw DataError("curve file '" + path + "' has " + std::to_string(rows) +
                        " rows, expected 256");
    return c;
}

namespace {

const cv::Scalar kPalette[] = {
    {180, 60, 30}, {30, 90, 200}, {40, 160, 60}, {30, 170, 200},
    {160, 40, 160}, {90, 90, 90}, {20, 50, 120}, {150, 140, 20},
};

struct Axes {
    cv::Mat img;
    int x0 = 80, y0 = 60, x1, y1;
    Axes(int w, int h, const std::string& xlabel, const std::string& ylabel) {
        img = cv::Mat(h, w, CV_8UC3, cv::Scalar(255, 255, 255));
        x1 = w - 40;
        y1 = h - 70;
        cv::rectangle(img, {x0, y0}, {x1, y1}, {0, 0, 0}, 1);
        for (int i = 0; i <= 5; ++i) {
            int x = x0 + (x1 - x0) * i / 5;
            int y = y1 - (y1 - y0) * i / 5;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "%.1f", i / 5.0);
            cv::putText(img, buf, {x - 12, y1 + 22}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1);
            cv::putText(img, buf, {x0 - 45, y + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1);
            cv::line(img, {x, y1}, {x, y1 + 4}, {0, 0, 0}, 1);
            cv::line(img, {x0 - 4, y}, {x0, y}, {0, 0, 0}, 1);
        }
        cv::putText(img, xlabel, {(x0 + x1) / 2 - 40, y1 + 48}, cv::FONT_HERSHEY_SIMPLEX, 0.55,
                    {0, 0, 0}, 1);
        cv::putText(img, ylabel, {12, y0 - 18}, cv::FONT_HERSHEY_SIMPLEX, 0.55, {0, 0, 0}, 1);
    }
    cv::Point map(double x, double y) const {
        return {x0 + static_cast<int>((x1 - x0) * x + 0.5),
                y1 - static_cast<int>((y1 - y0) * y + 0.5)};
    }
};

}  // namespace

void plot_curves(const std::vector<std::string>& files, const std::vector<std::string>& labels,
                 const std::string& kind, const std::string& out_png) {
    if (kind != "pr" && kind != "f") throw ConfigError("plot kind must be 'pr' or 'f'");
    if (files.empty()) throw ConfigError("no curve files given");
    bool f_curve = kind == "f";
    Axes axes(900, 700, f_curve ? "threshold" : "recall", f_curve ? "F-measure" : "precision");
    for (size_t i = 0; i < files.size(); ++i) {
        Curves c = read_curves_tsv(files[i], f_curve);
        cv::Scalar color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        cv::Point prev;
        for (int t = 0; t < 256; ++t) {
            cv::Point pt = f_curve ? axes.map(t / 255.0, std::clamp(c.f[t], 0.0, 1.0))
                                   : axes.map(std::clamp(c.recall[t], 0.0, 1.0),
                                              std::clamp(c.precision[t], 0.0, 1.0));
            if (t > 0) cv::line(axes.img, prev, pt, color, 2, cv::LINE_AA);
            prev = pt;
        }
        std::string label = i < labels.size() ? labels[i] : files[i];
        int ly = axes.y0 + 24 + static_cast<int>(i) * 22;
        cv::line(axes.img, {axes.x0 + 12, ly - 5}, {axes.x0 + 44, ly - 5}, color, 2);
        cv::putText(axes.img, label, {axes.x0 + 52, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0},
                    1);
    }
    if (!cv::imwrite(out_png, axes.img)) throw DataError("cannot write plot '" + out_png + "'");
}

void plot_montage(TriStageNet& model, const std::string& image_path, const std::string& out_png,
                  int64_t channels_per_map) {
    Tensor img = load_image(image_path, model->cfg.input_size).unsqueeze(0);
    bool was_training = model->is_training();
    model->eval();
    FeatureTap tap;
    {
        torch::NoGradGuard guard;
        model->forward(img, &tap);
    }
    if (was_training) model->train();

    const int tile = 96, pad = 4, label_w = 110;
    int rows = static_cast<int>(tap.maps.size());
    int cols = static_cast<int>(channels_per_map);
    cv::Mat canvas(rows * (tile + pad) + pad, label_w + cols * (tile + pad) + pad, CV_8UC3,
                   cv::Scalar(24, 24, 24));
    int r = 0;
    for (const auto& [name, feat] : tap.maps) {
        Tensor f = feat[0];  // (C,h,w)
        int64_t c_avail = std::min<int64_t>(channels_per_map, f.size(0));
        cv::putText(canvas, name, {6, r * (tile + pad) + pad + tile / 2},
                    cv::FONT_HERSHEY_SIMPLEX, 0.38, {220, 220, 220}, 1);
        for (int64_t c = 0; c < c_avail; ++c) {
            Tensor ch = normalize_for_eval(f[c]).to(torch::kFloat32);
            ch = upsample_bilinear(ch.unsqueeze(0).unsqueeze(0), tile, tile).squeeze();
            ch = (ch * 255).to(torch::kUInt8).contiguous();
            cv::Mat gray(tile, tile, CV_8UC1, ch.data_ptr());
            cv::Mat colored;
            cv::applyColorMap(gray, colored, cv::COLORMAP_VIRIDIS);
            colored.copyTo(canvas(cv::Rect(label_w + static_cast<int>(c) * (tile + pad) + pad,
                                           r * (tile + pad) + pad, tile, tile)));
        }
        ++r;
    }
    if (!cv::imwrite(out_png, canvas)) throw DataError("cannot write montage '" + out_png + "'");
}

}  // namespace tristage
