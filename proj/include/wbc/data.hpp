#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wbc/rng.hpp"

namespace wbc::data {

inline constexpr int kNumClasses = 5;

/// Fixed label order used everywhere: CSV labels, confusion matrices,
/// per-class reports and ROC files.
inline constexpr std::array<const char*, kNumClasses> kClassNames = {
    "Basophil", "Eosinophil", "Lymphocyte", "Monocyte", "Neutrophil"};

/// Reference class populations of the full blood-cell corpus, in label
/// order, and the pinned train/test partition sizes reproduced by the
/// "replica" split preset.
inline constexpr std::array<int, kNumClasses> kCorpusCounts = {301, 1066, 3461, 795, 8891};
inline constexpr std::array<int, kNumClasses> kPresetTrainCounts = {212, 744, 2427, 561, 6231};
inline constexpr std::array<int, kNumClasses> kPresetTestCounts = {89, 322, 1034, 234, 2660};

enum class Provenance : std::uint8_t { Original = 0, Augmented = 1 };

/// One RGB image, channel-last (H*W*3 floats, row-major), values in [0, 1]
/// after load-time rescaling from 8-bit.
struct LabeledImage {
    std::vector<float> pixels;
    int label = 0;
    Provenance provenance = Provenance::Original;
};

struct Dataset {
    int height = 0;
    int width = 0;
    std::vector<LabeledImage> images;
    std::array<std::vector<int>, kNumClasses> per_class_index;

    std::size_t size() const { return images.size(); }
    std::array<long, kNumClasses> class_counts() const;

    /// Re-derives per_class_index from the image list; rejects labels
    /// outside [0, kNumClasses).
    void rebuild_index();
};

/// Loads a dataset from CSV: one row per image, `label` first then
/// height*width*3 pixel columns (row-major, channel-last, 0-255). A header
/// line is detected by a non-numeric first cell and skipped. Pixels are
/// rescaled to [0, 1]. Errors carry the 1-based row number.
Dataset load_csv_dataset(const std::string& path, int height, int width);

/// Writes a dataset back out in the same CSV schema (pixels as 0-255
/// integers). The write is atomic: a temp file is renamed into place.
void write_csv_dataset(const Dataset& ds, const std::string& path);

struct SplitResult {
    Dataset train;
    Dataset test;
};

/// Stratified split: each class is shuffled independently (seeded) and cut
/// at round(fraction * class_count). Every class must be non-empty.
SplitResult stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Split preset that reproduces the pinned per-class train counts
/// (kPresetTrainCounts); the remainder of each class becomes the test set.
SplitResult preset_split(const Dataset& ds, std::uint64_t seed);

/// Per-channel mean and population standard deviation, computed over the
/// training split only (test data must not leak into these).
struct StandardizationStats {
    std::array<double, 3> mean{};
    std::array<double, 3> stddev{};
};

inline constexpr double kStddevFloor = 1e-7;

StandardizationStats compute_standardization(const Dataset& train);

/// In-place (pixel - mean[c]) / stddev[c] per channel.
void apply_standardization(std::vector<float>& pixels, const StandardizationStats& stats);

void write_stats(const StandardizationStats& stats, const std::string& path);
StandardizationStats read_stats(const std::string& path);

/// Random affine + flip policy applied when oversampling minority classes.
/// The defaults mirror the augmentation recipe the training pipeline is
/// built around: rescale 1/255 at load, rotation up to 10 degrees, width/
/// height shift up to 20% of the image size, shear up to 0.2 rad, zoom in
/// [0.9, 1.1], both flips at probability 0.5, nearest fill. The
/// featurewise/ZCA switches exist for config fidelity and must stay off.
struct AugmentationConfig {
    double rescale = 1.0 / 255.0;
    double rotation_range_degrees = 10.0;
    double width_shift_range = 0.2;
    double height_shift_range = 0.2;
    double shear_range = 0.2;
    double zoom_range = 0.1;
    bool horizontal_flip = true;
    bool vertical_flip = true;
    bool featurewise_center = false;
    bool featurewise_std_normalization = false;
    bool zca_whitening = false;
    std::string fill_mode = "nearest";
    std::vector<long> target_counts;  // per class; empty = no expansion
    std::uint64_t seed = 0;
};

/// Draws one random transform (fixed draw order: rotation, shear, zoom,
/// width shift, height shift, horizontal flip, vertical flip) and applies
/// it by inverse mapping with nearest-neighbor sampling; out-of-bounds
/// samples clamp to the nearest edge pixel ("nearest" fill). With all
/// ranges zero and flips disabled the output equals the input exactly.
LabeledImage augment_image(const LabeledImage& img, int height, int width,
                           const AugmentationConfig& cfg, RngStream& rng);

/// Deterministic mirror helpers used by augment_image.
void flip_horizontal(std::vector<float>& pixels, int height, int width);
void flip_vertical(std::vector<float>& pixels, int height, int width);

/// Oversamples every class up to its target count by cycling through that
/// class's originals in index order and appending one augmented copy per
/// deficit slot. Originals are retained unchanged and come first in the
/// output. The RNG stream for slot j of class c is derived from
/// (cfg.seed, c, j), so results do not depend on evaluation order.
Dataset balance_and_expand(const Dataset& train, const AugmentationConfig& cfg);

/// Expansion targets that grow a preset train split to 50,024 images:
/// ceil(total/5) for every class except the largest (by count; ties break
/// to the smallest label), which gets the remainder.
std::vector<long> preset_expansion_targets();

}  // namespace wbc::data
