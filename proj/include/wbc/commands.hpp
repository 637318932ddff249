#pragma once

#include <array>
#include <string>
#include <vector>

#include "wbc/config.hpp"

namespace wbc::cli {

/// File names every pipeline stage agrees on, all relative to
/// RunConfig::out_dir. prepare writes the first five; train and evaluate
/// consume them and add their own.
namespace artifact {
inline constexpr const char* kTrainCsv = "train.csv";
inline constexpr const char* kTestCsv = "test.csv";
inline constexpr const char* kStats = "stats.txt";
inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kCheckpoint = "checkpoint.bin";
inline constexpr const char* kEpochLog = "epoch_log.csv";
inline constexpr const char* kAccuracyChart = "accuracy.svg";
inline constexpr const char* kLossChart = "loss.svg";
inline constexpr const char* kMetricsCsv = "metrics.csv";
inline constexpr const char* kConfusionRaw = "confusion_raw.csv";
inline constexpr const char* kConfusionNormalized = "confusion_normalized.csv";
inline constexpr const char* kRocChart = "roc.svg";
inline constexpr const char* kSampleGrid = "samples.png";
inline constexpr const char* kExplanationCsv = "explanation.csv";
inline constexpr const char* kExplanationSidecar = "explanation.txt";
inline constexpr const char* kOverlayPng = "overlay.png";
inline constexpr const char* kOverlayPpm = "overlay.ppm";
}  // namespace artifact

std::string path_join(const std::string& dir, const std::string& name);

/// Per-class ROC CSV name for a class index ("roc_class_3.csv").
std::string roc_csv_name(int cls);

/// "<command>_config.txt" — the effective-config record written next to
/// every command's outputs so a run is reproducible from its artifacts.
std::string config_record_name(const std::string& command);

struct PrepareSummary {
    std::array<long, data::kNumClasses> train_counts{};
    std::array<long, data::kNumClasses> test_counts{};
    std::array<long, data::kNumClasses> expanded_counts{};
    long expanded_total = 0;
};

/// Ingests the source CSV, splits it, computes standardization stats on the
/// (pre-expansion) training split, optionally oversamples minority classes,
/// and materializes train/test CSVs + stats + a per-class manifest.
PrepareSummary run_prepare(const RunConfig& cfg);

struct TrainSummary {
    std::array<double, ensemble::kMemberCount> member_eval_accuracy{};
    double ensemble_eval_accuracy = 0;
};

/// Trains the three ensemble members on the prepared data (one thread
/// each), fits accuracy-proportional member weights, and writes the
/// checkpoint, the per-epoch log and accuracy/loss charts.
TrainSummary run_train(const RunConfig& cfg);

struct EvaluateSummary {
    double accuracy = 0;
    std::array<double, data::kNumClasses> auc{};
};

/// Scores the checkpoint on the prepared test split and writes the metric
/// table, raw + normalized confusion matrices, per-class ROC CSVs, a
/// combined ROC chart and an annotated sample grid.
EvaluateSummary run_evaluate(const RunConfig& cfg);

struct ExplainRequest {
    /// Test-split row to explain when image_path is empty.
    int test_index = 0;
    /// Optional external image: either a one-image CSV in the dataset
    /// schema (first row is used) or a binary PPM matching the model
    /// geometry.
    std::string image_path;
};

struct ExplainSummary {
    int target_class = -1;
    double target_probability = 0;
    std::vector<int> highlighted;  // region ids drawn on the overlay
};

/// Explains the ensemble's own prediction for one image: segments it, fits
/// the local surrogate against the combined probability of the predicted
/// class, and writes the overlay, the per-region coefficient CSV and a
/// plain-text sidecar with the run facts.
ExplainSummary run_explain(const RunConfig& cfg, const ExplainRequest& req);

}  // namespace wbc::cli
