#include "wbc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <thread>

#include "wbc/checkpoint.hpp"
#include "wbc/errors.hpp"
#include "wbc/fsio.hpp"
#include "wbc/image_io.hpp"
#include "wbc/metrics.hpp"
#include "wbc/rng.hpp"
#include "wbc/svg.hpp"

namespace wbc::cli {

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

void require_artifact(const std::string& path, const std::string& producer) {
    if (!io::file_exists(path)) {
        throw IoError("missing " + path + " - run `" + producer +
                      "` with the same output directory first");
    }
}

int argmax(const std::vector<double>& values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

/// Geometry handshake between a loaded checkpoint and the active config.
void check_geometry(const ensemble::EnsembleModel& model, const RunConfig& cfg) {
    const auto& shape = model.configs.at(0).input_shape;
    if (shape[1] != cfg.image_height || shape[2] != cfg.image_width) {
        throw GeometryError("checkpoint expects " + std::to_string(shape[1]) + "x" +
                            std::to_string(shape[2]) + " inputs but the config says " +
                            std::to_string(cfg.image_height) + "x" +
                            std::to_string(cfg.image_width));
    }
}

image::RasterU8 scale_nearest(const image::RasterU8& src, int factor) {
    image::RasterU8 dst(src.height * factor, src.width * factor);
    for (int y = 0; y < dst.height; ++y) {
        const std::uint8_t* src_row = src.pixel(y / factor, 0);
        for (int x = 0; x < dst.width; ++x) {
            const std::uint8_t* s = src_row + (x / factor) * 3;
            std::uint8_t* d = dst.pixel(y, x);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    }
    return dst;
}

/// Tile grid of test images labelled "ACT:<class initial>" over
/// "PRE:<class initial>"; misclassified tiles get red labels.
image::RasterU8 render_sample_grid(const data::Dataset& ds, const std::vector<int>& truth,
                                   const std::vector<int>& predicted) {
    const int n = static_cast<int>(ds.size());
    const int count = std::min(25, n);
    const int cols = std::min(5, count);
    const int rows = (count + cols - 1) / cols;
    const int scale = std::max(1, 56 / std::max(ds.height, ds.width));
    const int pad = 4;
    const int label_strip = 16;
    const int tile_w = ds.width * scale;
    const int tile_h = ds.height * scale + label_strip;

    image::RasterU8 canvas(rows * tile_h + (rows + 1) * pad, cols * tile_w + (cols + 1) * pad);
    for (std::uint8_t& b : canvas.rgb) b = 24;

    for (int k = 0; k < count; ++k) {
        // Spread the picks across the whole set so the grid is not just the
        // first few rows of one class.
        const int idx = static_cast<int>(static_cast<long>(k) * n / count);
        const int row = k / cols;
        const int col = k % cols;
        const int x0 = pad + col * (tile_w + pad);
        const int y0 = pad + row * (tile_h + pad);

        const image::RasterU8 tile =
            scale_nearest(image::from_float_rgb(ds.images[std::size_t(idx)].pixels, ds.height, ds.width), scale);
        for (int y = 0; y < tile.height; ++y) {
            for (int x = 0; x < tile.width; ++x) {
                const std::uint8_t* s = tile.pixel(y, x);
                std::uint8_t* d = canvas.pixel(y0 + y, x0 + x);
                d[0] = s[0];
                d[1] = s[1];
                d[2] = s[2];
            }
        }

        const bool hit = truth[std::size_t(idx)] == predicted[std::size_t(idx)];
        const std::array<std::uint8_t, 3> color =
            hit ? std::array<std::uint8_t, 3>{235, 235, 235} : std::array<std::uint8_t, 3>{255, 60, 60};
        const std::string act = std::string("ACT:") + data::kClassNames[std::size_t(truth[std::size_t(idx)])][0];
        const std::string pre = std::string("PRE:") + data::kClassNames[std::size_t(predicted[std::size_t(idx)])][0];
        image::draw_text(canvas, x0, y0 + ds.height * scale + 2, act, color);
        image::draw_text(canvas, x0, y0 + ds.height * scale + 9, pre, color);
    }
    return canvas;
}

}  // namespace

std::string path_join(const std::string& dir, const std::string& name) {
    if (dir.empty()) return name;
    if (dir.back() == '/') return dir + name;
    return dir + "/" + name;
}

std::string roc_csv_name(int cls) { return "roc_class_" + std::to_string(cls) + ".csv"; }

std::string config_record_name(const std::string& command) { return command + "_config.txt"; }

PrepareSummary run_prepare(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dataset_csv.empty()) {
        throw ConfigError("data.csv is empty - point it at the source dataset");
    }

    const data::Dataset ds = data::load_csv_dataset(cfg.dataset_csv, cfg.image_height, cfg.image_width);
    data::SplitResult split;
    if (cfg.split_mode == "fraction") {
        split = data::stratified_split(ds, cfg.split_fraction, cfg.seed);
    } else {
        split = data::preset_split(ds, cfg.seed);
    }

    // Standardization statistics come from the original training split,
    // before any oversampling, so augmented copies never influence them.
    const data::StandardizationStats stats = data::compute_standardization(split.train);

    const data::AugmentationConfig aug = cfg.augmentation();
    const data::Dataset expanded =
        aug.target_counts.empty() ? split.train : data::balance_and_expand(split.train, aug);

    io::ensure_directory(cfg.out_dir);
    data::write_csv_dataset(expanded, path_join(cfg.out_dir, artifact::kTrainCsv));
    data::write_csv_dataset(split.test, path_join(cfg.out_dir, artifact::kTestCsv));
    data::write_stats(stats, path_join(cfg.out_dir, artifact::kStats));

    PrepareSummary summary;
    summary.train_counts = split.train.class_counts();
    summary.test_counts = split.test.class_counts();
    summary.expanded_counts = expanded.class_counts();
    summary.expanded_total = static_cast<long>(expanded.size());

    std::string manifest = "geometry: " + std::to_string(cfg.image_height) + "x" +
                           std::to_string(cfg.image_width) + "\n";
    manifest += "split.mode: " + cfg.split_mode + "\n";
    auto block = [&manifest](const char* prefix, const std::array<long, data::kNumClasses>& counts) {
        long total = 0;
        for (int c = 0; c < data::kNumClasses; ++c) {
            manifest += std::string(prefix) + "." + data::kClassNames[std::size_t(c)] + ": " +
                        std::to_string(counts[std::size_t(c)]) + "\n";
            total += counts[std::size_t(c)];
        }
        manifest += std::string(prefix) + ".total: " + std::to_string(total) + "\n";
    };
    block("train", summary.train_counts);
    block("test", summary.test_counts);
    block("expanded", summary.expanded_counts);
    io::write_file_atomic(path_join(cfg.out_dir, artifact::kManifest), manifest);

    save_config(cfg, path_join(cfg.out_dir, config_record_name("prepare")));
    return summary;
}

TrainSummary run_train(const RunConfig& cfg) {
    cfg.validate();
    const std::string train_path = path_join(cfg.out_dir, artifact::kTrainCsv);
    const std::string test_path = path_join(cfg.out_dir, artifact::kTestCsv);
    const std::string stats_path = path_join(cfg.out_dir, artifact::kStats);
    require_artifact(train_path, "prepare");
    require_artifact(test_path, "prepare");
    require_artifact(stats_path, "prepare");

    const data::Dataset train_ds = data::load_csv_dataset(train_path, cfg.image_height, cfg.image_width);
    const data::Dataset test_ds = data::load_csv_dataset(test_path, cfg.image_height, cfg.image_width);
    const data::StandardizationStats stats = data::read_stats(stats_path);

    const ensemble::PreparedSet train_set = ensemble::prepare_set(train_ds, stats);
    const ensemble::PreparedSet eval_set = ensemble::prepare_set(test_ds, stats);

    ensemble::EnsembleModel model;
    model.configs = ensemble::default_members(cfg.image_height, cfg.image_width);
    model.combiner = cfg.combiner_mode();
    model.stats = stats;
    model.training_seed = cfg.seed;
    for (int i = 0; i < ensemble::kMemberCount; ++i) {
        model.graphs.push_back(ensemble::build_member(model.configs[std::size_t(i)],
                                                      derive_seed(cfg.seed, 0x1217, std::uint64_t(i))));
    }

    // The members are independent (own graph, optimizer state and RNG
    // streams), so they train on one thread each; results are identical to
    // a serial run.
    const optim::Hyperparams hp = cfg.optimizer_hyperparams();
    std::array<ensemble::TrainingRun, ensemble::kMemberCount> runs;
    std::array<std::exception_ptr, ensemble::kMemberCount> failures{};
    std::vector<std::thread> workers;
    for (int i = 0; i < ensemble::kMemberCount; ++i) {
        workers.emplace_back([&, i] {
            try {
                runs[std::size_t(i)] = ensemble::train_member(
                    model.graphs[std::size_t(i)], train_set, eval_set, hp, cfg.epochs,
                    cfg.batch_size, derive_seed(cfg.seed, 0x21a1, std::uint64_t(i)));
            } catch (...) {
                failures[std::size_t(i)] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    model.weights = ensemble::fit_member_weights(model.graphs, eval_set);

    TrainSummary summary;
    for (int i = 0; i < ensemble::kMemberCount; ++i) {
        summary.member_eval_accuracy[std::size_t(i)] =
            ensemble::member_accuracy(model.graphs[std::size_t(i)], eval_set);
    }
    long correct = 0;
    for (std::size_t s = 0; s < eval_set.size(); ++s) {
        if (model.predict_class(eval_set.inputs[s]) == eval_set.labels[s]) ++correct;
    }
    summary.ensemble_eval_accuracy =
        eval_set.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(eval_set.size());

    io::ensure_directory(cfg.out_dir);
    checkpoint::save(path_join(cfg.out_dir, artifact::kCheckpoint), model);

    std::string log = "epoch,member,train_loss,train_acc,eval_loss,eval_acc\n";
    for (int i = 0; i < ensemble::kMemberCount; ++i) {
        for (const ensemble::EpochRecord& r : runs[std::size_t(i)].epochs) {
            log += std::to_string(r.epoch) + "," + model.configs[std::size_t(i)].id + "," +
                   g17(r.train_loss) + "," + g17(r.train_accuracy) + "," + g17(r.eval_loss) + "," +
                   g17(r.eval_accuracy) + "\n";
        }
    }
    io::write_file_atomic(path_join(cfg.out_dir, artifact::kEpochLog), log);

    static const char* kTrainColors[ensemble::kMemberCount] = {"#1f77b4", "#d62728", "#2ca02c"};
    static const char* kEvalColors[ensemble::kMemberCount] = {"#9ecae1", "#ff9896", "#98df8a"};
    std::vector<svg::Series> acc_series, loss_series;
    for (int i = 0; i < ensemble::kMemberCount; ++i) {
        svg::Series acc_train, acc_eval, loss_train, loss_eval;
        const std::string id(1, model.configs[std::size_t(i)].id);
        acc_train.label = id + " train";
        acc_eval.label = id + " eval";
        loss_train.label = id + " train";
        loss_eval.label = id + " eval";
        acc_train.color = loss_train.color = kTrainColors[i];
        acc_eval.color = loss_eval.color = kEvalColors[i];
        for (const ensemble::EpochRecord& r : runs[std::size_t(i)].epochs) {
            const double e = r.epoch;
            acc_train.x.push_back(e);
            acc_train.y.push_back(r.train_accuracy);
            acc_eval.x.push_back(e);
            acc_eval.y.push_back(r.eval_accuracy);
            loss_train.x.push_back(e);
            loss_train.y.push_back(r.train_loss);
            loss_eval.x.push_back(e);
            loss_eval.y.push_back(r.eval_loss);
        }
        acc_series.push_back(std::move(acc_train));
        acc_series.push_back(std::move(acc_eval));
        loss_series.push_back(std::move(loss_train));
        loss_series.push_back(std::move(loss_eval));
    }
    svg::write_line_chart(path_join(cfg.out_dir, artifact::kAccuracyChart),
                          "member accuracy by epoch", "epoch", "accuracy", acc_series);
    svg::write_line_chart(path_join(cfg.out_dir, artifact::kLossChart), "member loss by epoch",
                          "epoch", "loss", loss_series);

    save_config(cfg, path_join(cfg.out_dir, config_record_name("train")));
    return summary;
}

EvaluateSummary run_evaluate(const RunConfig& cfg) {
    cfg.validate();
    const std::string ckpt_path = path_join(cfg.out_dir, artifact::kCheckpoint);
    require_artifact(ckpt_path, "train");
    ensemble::EnsembleModel model = checkpoint::load(ckpt_path);
    check_geometry(model, cfg);

    const std::string test_path = path_join(cfg.out_dir, artifact::kTestCsv);
    require_artifact(test_path, "prepare");
    const data::Dataset test_ds = data::load_csv_dataset(test_path, cfg.image_height, cfg.image_width);
    if (test_ds.size() == 0) throw DataFormatError(test_path + ": test split is empty");
    const ensemble::PreparedSet test_set = ensemble::prepare_set(test_ds, model.stats);

    const int n = static_cast<int>(test_set.size());
    std::vector<int> predicted(static_cast<std::size_t>(n));
    std::vector<std::vector<double>> probs(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        probs[std::size_t(s)] = model.predict(test_set.inputs[std::size_t(s)]);
        predicted[std::size_t(s)] = argmax(probs[std::size_t(s)]);
    }
    const std::vector<int>& truth = test_set.labels;

    const metrics::ConfusionMatrix cm = metrics::confusion_matrix(truth, predicted, data::kNumClasses);
    const metrics::PerClassReport report = metrics::per_class_report(cm);
    const double accuracy = metrics::overall_accuracy(cm);

    io::ensure_directory(cfg.out_dir);

    std::vector<std::string> names(data::kClassNames.begin(), data::kClassNames.end());

    // Per-class metric table with AV / STD / Accuracy footer rows.
    std::string table = "Class Label,Precision,Recall,F1 Score,Specificity,Support\n";
    for (int c = 0; c < data::kNumClasses; ++c) {
        const auto& row = report.rows[std::size_t(c)];
        table += names[std::size_t(c)] + "," + g17(row.precision) + "," + g17(row.recall) + "," +
                 g17(row.f1) + "," + g17(row.specificity) + "," + std::to_string(row.support) + "\n";
    }
    double support_var = 0;
    for (const auto& row : report.rows) {
        const double d = static_cast<double>(row.support) - report.av_support;
        support_var += d * d;
    }
    const double std_support = std::sqrt(support_var / data::kNumClasses);
    table += "AV," + g17(report.av_precision) + "," + g17(report.av_recall) + "," +
             g17(report.av_f1) + "," + g17(report.av_specificity) + "," + g17(report.av_support) + "\n";
    table += "STD," + g17(report.std_precision) + "," + g17(report.std_recall) + "," +
             g17(report.std_f1) + "," + g17(report.std_specificity) + "," + g17(std_support) + "\n";
    table += "Accuracy," + g17(accuracy) + ",,,,\n";
    io::write_file_atomic(path_join(cfg.out_dir, artifact::kMetricsCsv), table);

    io::write_file_atomic(path_join(cfg.out_dir, artifact::kConfusionRaw),
                          metrics::confusion_to_csv(cm, names));

    const std::vector<double> norm = metrics::normalize_confusion(cm);
    std::string ncsv = "truth\\predicted";
    for (const auto& name : names) ncsv += "," + name;
    ncsv += "\n";
    for (int i = 0; i < data::kNumClasses; ++i) {
        ncsv += names[std::size_t(i)];
        for (int j = 0; j < data::kNumClasses; ++j) {
            ncsv += "," + g17(norm[std::size_t(i) * data::kNumClasses + std::size_t(j)]);
        }
        ncsv += "\n";
    }
    io::write_file_atomic(path_join(cfg.out_dir, artifact::kConfusionNormalized), ncsv);

    static const char* kRocColors[data::kNumClasses] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                        "#9467bd"};
    EvaluateSummary summary;
    summary.accuracy = accuracy;
    std::vector<svg::Series> roc_series;
    for (int c = 0; c < data::kNumClasses; ++c) {
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) scores[std::size_t(s)] = probs[std::size_t(s)][std::size_t(c)];
        std::string rcsv = "class,threshold,fpr,tpr\n";
        try {
            const metrics::RocCurve curve = metrics::roc_curve(scores, truth, c);
            summary.auc[std::size_t(c)] = curve.auc;
            svg::Series series;
            series.label = names[std::size_t(c)] + " AUC " + fmt4(curve.auc);
            series.color = kRocColors[c];
            for (const metrics::RocPoint& p : curve.points) {
                rcsv += names[std::size_t(c)] + "," + g17(p.threshold) + "," + g17(p.fpr) + "," +
                        g17(p.tpr) + "\n";
                series.x.push_back(p.fpr);
                series.y.push_back(p.tpr);
            }
            roc_series.push_back(std::move(series));
        } catch (const std::invalid_argument&) {
            // The class is absent from the test split (or fills it
            // entirely), so a one-vs-rest sweep is undefined. Emit the
            // header-only CSV to keep the artifact set complete.
            summary.auc[std::size_t(c)] = 0.0;
        }
        io::write_file_atomic(path_join(cfg.out_dir, roc_csv_name(c)), rcsv);
    }
    svg::write_line_chart(path_join(cfg.out_dir, artifact::kRocChart), "one-vs-rest ROC",
                          "false positive rate", "true positive rate", roc_series);

    image::write_png(render_sample_grid(test_ds, truth, predicted),
                     path_join(cfg.out_dir, artifact::kSampleGrid));

    save_config(cfg, path_join(cfg.out_dir, config_record_name("evaluate")));
    return summary;
}

ExplainSummary run_explain(const RunConfig& cfg, const ExplainRequest& req) {
    cfg.validate();
    const std::string ckpt_path = path_join(cfg.out_dir, artifact::kCheckpoint);
    require_artifact(ckpt_path, "train");
    ensemble::EnsembleModel model = checkpoint::load(ckpt_path);
    check_geometry(model, cfg);
    const int h = cfg.image_height;
    const int w = cfg.image_width;

    std::vector<float> pixels;
    std::string source;
    if (!req.image_path.empty()) {
        if (req.image_path.ends_with(".ppm")) {
            const image::RasterU8 raster = image::read_ppm(req.image_path);
            if (raster.height != h || raster.width != w) {
                throw GeometryError(req.image_path + " is " + std::to_string(raster.height) + "x" +
                                    std::to_string(raster.width) + " but the model expects " +
                                    std::to_string(h) + "x" + std::to_string(w));
            }
            pixels.resize(raster.rgb.size());
            for (std::size_t i = 0; i < raster.rgb.size(); ++i) {
                pixels[i] = static_cast<float>(raster.rgb[i]) / 255.0f;
            }
        } else {
            const data::Dataset single = data::load_csv_dataset(req.image_path, h, w);
            if (single.size() == 0) throw DataFormatError(req.image_path + ": no image rows");
            pixels = single.images[0].pixels;
        }
        source = req.image_path;
    } else {
        const std::string test_path = path_join(cfg.out_dir, artifact::kTestCsv);
        require_artifact(test_path, "prepare");
        const data::Dataset test_ds = data::load_csv_dataset(test_path, h, w);
        if (req.test_index < 0 || req.test_index >= static_cast<int>(test_ds.size())) {
            throw std::out_of_range("test index " + std::to_string(req.test_index) +
                                    " out of range [0, " + std::to_string(test_ds.size()) + ")");
        }
        pixels = test_ds.images[std::size_t(req.test_index)].pixels;
        source = test_path + " row " + std::to_string(req.test_index);
    }

    const std::vector<double> base = model.predict(ensemble::to_model_input(pixels, h, w, model.stats));
    const int target = argmax(base);

    const explain::ExplainConfig ecfg = cfg.explain_config();
    const explain::ModelFn target_probability = [&model, h, w, target](const std::vector<float>& p) {
        return model.predict(ensemble::to_model_input(p, h, w, model.stats))[std::size_t(target)];
    };
    const explain::ExplanationResult res =
        explain::explain_image(pixels, h, w, target, target_probability, ecfg);

    const int keep = std::min(4, res.map.regions);
    const std::vector<int> top = explain::top_regions(res.explanation, keep);

    io::ensure_directory(cfg.out_dir);
    const image::RasterU8 overlay = explain::render_overlay(pixels, h, w, res.map, top);
    if (cfg.overlay_format == "png") {
        image::write_png(overlay, path_join(cfg.out_dir, artifact::kOverlayPng));
    } else {
        image::write_ppm(overlay, path_join(cfg.out_dir, artifact::kOverlayPpm));
    }

    std::string csv = "region,coefficient\n";
    for (int r = 0; r < res.map.regions; ++r) {
        csv += std::to_string(r) + "," + g17(res.explanation.coefficients[std::size_t(r)]) + "\n";
    }
    io::write_file_atomic(path_join(cfg.out_dir, artifact::kExplanationCsv), csv);

    std::string sidecar;
    sidecar += "source: " + source + "\n";
    sidecar += "predicted.class: " + std::to_string(target) + "\n";
    sidecar += "predicted.name: " + std::string(data::kClassNames[std::size_t(target)]) + "\n";
    sidecar += "predicted.probability: " + g17(base[std::size_t(target)]) + "\n";
    sidecar += "regions: " + std::to_string(res.map.regions) + "\n";
    sidecar += "samples: " + std::to_string(res.explanation.sample_count) + "\n";
    sidecar += "kernel.width: " + g17(res.explanation.kernel_width) + "\n";
    sidecar += "ridge.lambda: " + g17(res.explanation.ridge_lambda) + "\n";
    sidecar += "seed: " + std::to_string(res.explanation.seed) + "\n";
    sidecar += "intercept: " + g17(res.explanation.intercept) + "\n";
    std::string ids;
    for (int id : top) {
        if (!ids.empty()) ids += ",";
        ids += std::to_string(id);
    }
    sidecar += "highlighted: " + ids + "\n";
    io::write_file_atomic(path_join(cfg.out_dir, artifact::kExplanationSidecar), sidecar);

    save_config(cfg, path_join(cfg.out_dir, config_record_name("explain")));

    ExplainSummary summary;
    summary.target_class = target;
    summary.target_probability = base[std::size_t(target)];
    summary.highlighted = top;
    return summary;
}

}  // namespace wbc::cli
