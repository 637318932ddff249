#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wbc/image_io.hpp"
#include "wbc/rng.hpp"

namespace wbc::explain {

/// Partition of an image into contiguous regions ("superpixels"). Every
/// pixel belongs to exactly one region; region ids are dense 0..regions-1.
struct SuperpixelMap {
    int height = 0;
    int width = 0;
    int regions = 0;
    std::vector<int> labels;                           // H*W, region id per pixel
    std::vector<std::vector<int>> region_pixels;       // pixel indices per region
    std::vector<std::array<float, 3>> region_mean;     // mean RGB per region

    void rebuild_from_labels();  // derives region_pixels; validates coverage
};

/// Regular g x g grid segmentation; remainder rows/columns join the last
/// block so coverage is exact for any geometry.
SuperpixelMap segment_grid(const std::vector<float>& pixels, int height, int width, int grid);

/// Lightweight SLIC-style segmentation: k-means over (R, G, B, x, y) with
/// grid-seeded centers, a compactness factor scaling the spatial term, and
/// a connectivity pass that reassigns stray fragments to an adjacent
/// region. Deterministic for fixed inputs.
SuperpixelMap segment_slic_lite(const std::vector<float>& pixels, int height, int width,
                                int target_regions, double compactness, int iterations);

/// n_samples binary masks over `regions` bits; the first mask is all-ones
/// (the unperturbed image), the rest draw each bit as an independent fair
/// coin from `rng`.
std::vector<std::vector<std::uint8_t>> sample_masks(int regions, int n_samples, RngStream& rng);

/// Replaces every masked-off region with that region's mean color.
std::vector<float> apply_mask(const std::vector<float>& pixels, const SuperpixelMap& map,
                              const std::vector<std::uint8_t>& mask);

/// exp(-d^2 / width^2) with d = sqrt(#zeroed regions) / sqrt(#regions);
/// the all-ones mask has weight exactly 1.
double kernel_weight(const std::vector<std::uint8_t>& mask, double width);

/// Local linear surrogate fitted around one prediction.
struct Explanation {
    std::vector<double> coefficients;  // one per region
    double intercept = 0;
    int target_class = -1;
    int sample_count = 0;
    double kernel_width = 0;
    double ridge_lambda = 0;
    std::uint64_t seed = 0;
};

/// Weighted ridge regression of model responses onto mask bits. Features
/// are centered by their weighted mean, the intercept is unpenalized and
/// equals the weighted mean response (the fitted model is
/// intercept + beta . (z - z_mean)), and the coefficients of a model that
/// is exactly linear in the mask are recovered exactly as lambda -> 0.
/// lambda == 0 falls back to plain weighted least squares and throws
/// SingularSystemError when the system is rank-deficient.
Explanation fit_surrogate(const std::vector<std::vector<std::uint8_t>>& masks,
                          const std::vector<double>& responses, const std::vector<double>& weights,
                          double ridge_lambda);

/// Region ids of the k largest positive coefficients, descending; ties
/// break to the lower region id. Regions with non-positive coefficients
/// never qualify.
std::vector<int> top_regions(const Explanation& e, int k);

struct ExplainConfig {
    enum class Segmenter { Grid, SlicLite };
    Segmenter segmenter = Segmenter::Grid;
    int grid = 4;                 // grid segmenter
    int target_regions = 16;      // slic segmenter
    double compactness = 0.5;     // slic segmenter
    int iterations = 10;          // slic segmenter
    int samples = 1000;
    double kernel_width = 0.25;
    double ridge_lambda = 1.0;
    std::uint64_t seed = 0;
};

/// Target-class probability of a raw [0,1] channel-last pixel buffer.
using ModelFn = std::function<double(const std::vector<float>& pixels)>;

struct ExplanationResult {
    SuperpixelMap map;
    Explanation explanation;
};

/// Full pipeline: segment, perturb, query the model per sample, weight by
/// proximity kernel, fit the ridge surrogate.
ExplanationResult explain_image(const std::vector<float>& pixels, int height, int width,
                                int target_class, const ModelFn& model, const ExplainConfig& cfg);

/// Renders the original image with the selected regions highlighted: every
/// selected region is alpha-tinted (0.4) — the first ("top") region in
/// green, the rest in yellow — and the top region additionally gets a solid
/// green boundary so it stands out. An empty selection returns the image
/// unchanged.
image::RasterU8 render_overlay(const std::vector<float>& pixels, int height, int width,
                               const SuperpixelMap& map, const std::vector<int>& region_ids);

}  // namespace wbc::explain
