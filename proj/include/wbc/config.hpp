#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wbc/data.hpp"
#include "wbc/ensemble.hpp"
#include "wbc/explain.hpp"
#include "wbc/optim.hpp"

namespace wbc::cli {

/// Full run configuration. Flat key=value text format ('#' comments, blank
/// lines ignored); every field has a default, unknown keys are rejected,
/// and save/load round-trips losslessly.
struct RunConfig {
    // general
    std::uint64_t seed = 42;
    std::string out_dir = "runs/out";

    // data
    std::string dataset_csv;
    int image_height = 64;
    int image_width = 64;

    // split
    std::string split_mode = "fraction";  // fraction | replica
    double split_fraction = 0.8;

    // augmentation (ranges mirror data::AugmentationConfig defaults)
    double augment_rotation_range = 10.0;
    double augment_width_shift = 0.2;
    double augment_height_shift = 0.2;
    double augment_shear_range = 0.2;
    double augment_zoom_range = 0.1;
    bool augment_horizontal_flip = true;
    bool augment_vertical_flip = true;
    std::string augment_fill_mode = "nearest";
    /// "none", "replica" (grow the pinned split to 50,024) or a
    /// comma-separated list of five per-class targets.
    std::string augment_targets = "none";

    // ensemble / training
    std::string combiner = "weighted";  // average | weighted | max_confidence
    std::string optimizer = "adam";     // sgd | rmsprop | adam
    /// "auto" picks the optimizer's conventional default (sgd 1e-2,
    /// rmsprop/adam 1e-3); otherwise a positive number.
    std::string learning_rate = "auto";
    int epochs = 10;
    int batch_size = 32;

    // explain
    std::string explain_segmenter = "grid";  // grid | slic
    int explain_grid = 4;
    int explain_regions = 16;
    double explain_compactness = 0.5;
    int explain_iterations = 10;
    int explain_samples = 1000;
    double explain_kernel_width = 0.25;
    double explain_ridge_lambda = 1.0;
    std::string overlay_format = "png";  // png | ppm

    // ---- derived views ----
    data::AugmentationConfig augmentation() const;
    optim::Hyperparams optimizer_hyperparams() const;
    ensemble::Combiner combiner_mode() const;
    explain::ExplainConfig explain_config() const;
    /// Expansion targets resolved against the configured mode; empty means
    /// "no expansion".
    std::vector<long> expansion_targets() const;

    void validate() const;
};

/// Applies a named bundle of defaults:
///   replica — 64x64 geometry, pinned per-class split, expansion to 50,024,
///             50 epochs, batch 64 (the full-scale reproduction recipe)
///   desk    — 28x28 geometry, 0.8 fraction split, no expansion, 10
///             epochs, batch 32 (runs on a desktop in reasonable time)
void apply_preset(RunConfig& cfg, const std::string& preset);

/// Parses a config file; `overrides` (e.g. from --set key=value flags) are
/// applied afterwards. Unknown keys throw ConfigError naming the key.
RunConfig load_config(const std::string& path);
RunConfig config_from_map(const std::map<std::string, std::string>& kv);
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_value_pairs);

/// Serializes every field (sorted keys). load(save(cfg)) == cfg.
std::string config_to_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace wbc::cli
