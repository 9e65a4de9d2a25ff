#include "tristage/evalrun.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;

namespace tristage {

namespace {

struct ImageEval {
    MetricSummary per_decoder[3];
    Curves curves;  // final decoder
    bool small[3] = {false, false, false};
};

// Per-image metrics fan out over workers; the reduction below walks results
// in index order so the report is independent of scheduling.
std::vector<ImageEval> compute_all(const std::vector<std::vector<Tensor>>& preds,
                                   const std::vector<Tensor>& gts,
                                   const std::vector<double>& taus, int64_t workers) {
    std::vector<ImageEval> out(preds.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        for (size_t i = next.fetch_add(1); i < preds.size(); i = next.fetch_add(1)) {
            for (size_t d = 0; d < preds[i].size(); ++d)
                out[i].per_decoder[d] = evaluate_pair(preds[i][d], gts[i]);
            Tensor p = quantize256(normalize_for_eval(preds[i][0]));
            out[i].curves = pr_f_curves(p, gts[i]);
            for (size_t t = 0; t < taus.size() && t < 3; ++t)
                out[i].small[t] = is_small_target(gts[i], taus[t]);
        }
    };
    int64_t nw = std::max<int64_t>(1, std::min<int64_t>(workers, static_cast<int64_t>(preds.size())));
    std::vector<std::thread> pool;
    for (int64_t t = 0; t < nw; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return out;
}

EvalRow mean_row(const std::string& label, const std::vector<ImageEval>& evals,
                 const std::vector<char>& select, int decoder) {
    EvalRow row;
    row.label = label;
    for (size_t i = 0; i < evals.size(); ++i) {
        if (!select[i]) continue;
        const auto& m = evals[i].per_decoder[decoder];
        row.count += 1;
        row.s_m += m.s_m;
        row.f_w += m.f_w;
        row.mae_v += m.mae_v;
        row.e_m += m.e_m;
    }
    if (row.count > 0) {
        double n = static_cast<double>(row.count);
        row.s_m /= n;
        row.f_w /= n;
        row.mae_v /= n;
        row.e_m /= n;
    }
    return row;
}

EvalResult finish(const std::vector<std::string>& names,
                  const std::vector<std::vector<Tensor>>& preds, const std::vector<Tensor>& gts,
                  const EvalOptions& opts) {
    auto evals = compute_all(preds, gts, opts.small_taus, opts.workers);

    EvalResult res;
    std::vector<char> all(evals.size(), 1);
    res.rows.push_back(mean_row(opts.label + "_third", evals, all, 0));
    if (opts.per_decoder && preds[0].size() == 3) {
        res.rows.push_back(mean_row(opts.label + "_second", evals, all, 1));
        res.rows.push_back(mean_row(opts.label + "_first", evals, all, 2));
    }
    for (size_t t = 0; t < opts.small_taus.size() && t < 3; ++t) {
        std::vector<char> sel(evals.size());
        for (size_t i = 0; i < evals.size(); ++i) sel[i] = evals[i].small[t];
        res.rows.push_back(mean_row(opts.label + "_small" +
                                        std::to_string(static_cast<int>(std::lround(
                                            1.0 / opts.small_taus[t]))),
                                    evals, sel, 0));
    }

    for (size_t i = 0; i < evals.size(); ++i)
        res.per_image.push_back({names[i], evals[i].per_decoder[0]});

    for (int t = 0; t < 256; ++t) {
        double p = 0, r = 0, f = 0;
        for (const auto& e : evals) {
            p += e.curves.precision[t];
            r += e.curves.recall[t];
            f += e.curves.f[t];
        }
        double n = static_cast<double>(evals.size());
        res.mean_curves.precision[t] = p / n;
        res.mean_curves.recall[t] = r / n;
        res.mean_curves.f[t] = f / n;
    }

    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        std::ofstream rep(fs::path(opts.out_dir) / (opts.label + "_report.tsv"));
        rep << "label\tcount\tS_m\tF_w\tMAE\tE_m\n";
        rep.precision(6);
        rep << std::fixed;
        for (const auto& row : res.rows)
            rep << row.label << "\t" << row.count << "\t" << row.s_m << "\t" << row.f_w << "\t"
                << row.mae_v << "\t" << row.e_m << "\n";
        std::ofstream per(fs::path(opts.out_dir) / (opts.label + "_per_image.tsv"));
        per << "name\tS_m\tF_w\tMAE\tE_m\n";
        per.precision(6);
        per << std::fixed;
        for (const auto& r : res.per_image)
            per << r.name << "\t" << r.third.s_m << "\t" << r.third.f_w << "\t" << r.third.mae_v
                << "\t" << r.third.e_m << "\n";
        write_curves_tsv((fs::path(opts.out_dir) / opts.label).string(), res.mean_curves);
    }
    return res;
}

}  // namespace

void write_curves_tsv(const std::string& path_prefix, const Curves& curves) {
    {
        std::ofstream os(path_prefix + "_pr.tsv");
        os << "threshold\tprecision\trecall\n";
        os.precision(9);
        os << std::fixed;
        for (int t = 0; t < 256; ++t)
            os << t << "\t" << curves.precision[t] << "\t" << curves.recall[t] << "\n";
    }
    std::ofstream os(path_prefix + "_f.tsv");
    os << "threshold\tf\n";
    os.precision(9);
    os << std::fixed;
    for (int t = 0; t < 256; ++t) os << t << "\t" << curves.f[t] << "\n";
}

EvalResult evaluate_model(TriStageNet& model, const Dataset& data, const EvalOptions& opts) {
    bool was_training = model->is_training();
    model->eval();
    torch::NoGradGuard guard;
    std::vector<std::string> names;
    std::vector<std::vector<Tensor>> preds;
    std::vector<Tensor> gts;
    size_t n = data.size();
    for (size_t i = 0; i < n; i += opts.batch) {
        std::vector<size_t> idx;
        for (size_t j = i; j < std::min(n, i + opts.batch); ++j) idx.push_back(j);
        Batch batch = load_batch(data, idx, false, 0, {}, opts.workers);
        StageOutputs so = model->forward(batch.images);
        for (size_t j = 0; j < idx.size(); ++j) {
            names.push_back(batch.names[j]);
            std::vector<Tensor> stages;
            stages.push_back(so.stage_prob(3)[j]);
            if (opts.per_decoder) {
                stages.push_back(so.stage_prob(2)[j]);
                stages.push_back(so.stage_prob(1)[j]);
            }
            preds.push_back(std::move(stages));
            gts.push_back(batch.masks[j]);
        }
    }
    if (was_training) model->train();
    return finish(names, preds, gts, opts);
}

EvalResult evaluate_predictions(const std::string& pred_dir, const Dataset& data,
                                const EvalOptions& opts) {
    std::vector<std::string> names;
    std::vector<std::vector<Tensor>> preds;
    std::vector<Tensor> gts;
    std::vector<std::string> missing;
    for (size_t i = 0; i < data.size(); ++i) {
        const auto& p = data.paths(i);
        fs::path f = fs::path(pred_dir) / (p.stem + ".png");
        if (!fs::exists(f)) {
            missing.push_back(p.stem);
            continue;
        }
        Tensor gt = data.mask_only(i);
        Tensor pred = load_prob_map(f.string(), gt.size(-1));
        names.push_back(p.stem);
        preds.push_back({pred});
        gts.push_back(gt);
    }
    if (!missing.empty()) {
        std::cerr << "excluded " << missing.size() << " samples without predictions:";
        for (const auto& m : missing) std::cerr << " " << m;
        std::cerr << "\n";
    }
    if (preds.empty()) throw DataError("no usable predictions under '" + pred_dir + "'");
    return finish(names, preds, gts, opts);
}

std::vector<size_t> filter_small(const Dataset& data, double tau) {
    std::vector<size_t> out;
    for (size_t i = 0; i < data.size(); ++i)
        if (is_small_target(data.mask_only(i), tau)) out.push_back(i);
    return out;
}

void run_inference(TriStageNet& model, const Dataset& data, const std::string& out_dir,
                   int64_t batch) {
    bool was_training = model->is_training();
    model->eval();
    torch::NoGradGuard guard;
    fs::create_directories(out_dir);
    std::ofstream manifest(fs::path(out_dir) / "manifest.txt");
    size_t n = data.size();
    for (size_t i = 0; i < n; i += batch) {
        std::vector<size_t> idx;
        for (size_t j = i; j < std::min(n, i + static_cast<size_t>(batch)); ++j) idx.push_back(j);
        Batch b = load_batch(data, idx, false, 0, {}, 1);
        StageOutputs so = model->forward(b.images);
        Tensor prob = so.stage_prob(3);
        for (size_t j = 0; j < idx.size(); ++j) {
            fs::path out = fs::path(out_dir) / (b.names[j] + ".png");
            write_mask_png(out.string(), prob[j]);
            manifest << data.paths(idx[j]).image << " " << out.string() << " "
                     << so.boxes[j].to_string() << "\n";
        }
    }
    if (was_training) model->train();
}

}  // namespace tristage
