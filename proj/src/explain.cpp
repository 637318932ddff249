#include "wbc/explain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "wbc/errors.hpp"

namespace wbc::explain {

namespace {

void check_pixel_buffer(const std::vector<float>& pixels, int height, int width) {
    if (height <= 0 || width <= 0) throw GeometryError("segmentation: non-positive geometry");
    if (pixels.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeError("segmentation: pixel buffer does not match geometry");
    }
}

}  // namespace

void SuperpixelMap::rebuild_from_labels() {
    if (labels.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeError("superpixel map: label buffer does not match geometry");
    }
    region_pixels.assign(static_cast<std::size_t>(regions), {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int r = labels[i];
        if (r < 0 || r >= regions) {
            throw ShapeError("superpixel map: label " + std::to_string(r) + " outside [0, " +
                             std::to_string(regions) + ")");
        }
        region_pixels[static_cast<std::size_t>(r)].push_back(static_cast<int>(i));
    }
    for (int r = 0; r < regions; ++r) {
        if (region_pixels[static_cast<std::size_t>(r)].empty()) {
            throw ShapeError("superpixel map: region " + std::to_string(r) + " is empty");
        }
    }
}

namespace {

void compute_region_means(const std::vector<float>& pixels, SuperpixelMap& map) {
    map.region_mean.assign(static_cast<std::size_t>(map.regions), {0.f, 0.f, 0.f});
    for (int r = 0; r < map.regions; ++r) {
        std::array<double, 3> acc{};
        const auto& members = map.region_pixels[static_cast<std::size_t>(r)];
        for (int pix : members) {
            for (int c = 0; c < 3; ++c) acc[static_cast<std::size_t>(c)] += pixels[static_cast<std::size_t>(pix) * 3 + static_cast<std::size_t>(c)];
        }
        for (int c = 0; c < 3; ++c) {
            map.region_mean[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                static_cast<float>(acc[static_cast<std::size_t>(c)] / static_cast<double>(members.size()));
        }
    }
}

}  // namespace

SuperpixelMap segment_grid(const std::vector<float>& pixels, int height, int width, int grid) {
    check_pixel_buffer(pixels, height, width);
    if (grid < 1 || grid > height || grid > width) {
        throw GeometryError("segment_grid: grid " + std::to_string(grid) + " does not fit " +
                            std::to_string(height) + "x" + std::to_string(width));
    }
    SuperpixelMap map;
    map.height = height;
    map.width = width;
    map.regions = grid * grid;
    map.labels.resize(static_cast<std::size_t>(height) * width);
    const int cell_h = height / grid;
    const int cell_w = width / grid;
    for (int y = 0; y < height; ++y) {
        const int gy = std::min(y / cell_h, grid - 1);  // remainder joins the last row of blocks
        for (int x = 0; x < width; ++x) {
            const int gx = std::min(x / cell_w, grid - 1);
            map.labels[static_cast<std::size_t>(y) * width + x] = gy * grid + gx;
        }
    }
    map.rebuild_from_labels();
    compute_region_means(pixels, map);
    return map;
}

SuperpixelMap segment_slic_lite(const std::vector<float>& pixels, int height, int width,
                                int target_regions, double compactness, int iterations) {
    check_pixel_buffer(pixels, height, width);
    if (target_regions < 1 || target_regions > height * width) {
        throw GeometryError("segment_slic_lite: target region count " + std::to_string(target_regions) +
                            " does not fit " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (compactness < 0 || iterations < 1) {
        throw std::invalid_argument("segment_slic_lite: compactness must be >= 0 and iterations >= 1");
    }

    // Seed centers on a grid whose aspect follows the image.
    int ny = std::max(1, static_cast<int>(std::lround(std::sqrt(
                 static_cast<double>(target_regions) * height / std::max(1, width)))));
    ny = std::min(ny, height);
    int nx = std::max(1, static_cast<int>(std::lround(static_cast<double>(target_regions) / ny)));
    nx = std::min(nx, width);
    const int k = nx * ny;

    struct Center {
        double r = 0, g = 0, b = 0, x = 0, y = 0;
    };
    std::vector<Center> centers(static_cast<std::size_t>(k));
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            Center& c = centers[static_cast<std::size_t>(iy) * nx + ix];
            c.y = (iy + 0.5) * height / ny - 0.5;
            c.x = (ix + 0.5) * width / nx - 0.5;
            const int py = std::clamp(static_cast<int>(std::lround(c.y)), 0, height - 1);
            const int px = std::clamp(static_cast<int>(std::lround(c.x)), 0, width - 1);
            const std::size_t at = (static_cast<std::size_t>(py) * width + px) * 3;
            c.r = pixels[at];
            c.g = pixels[at + 1];
            c.b = pixels[at + 2];
        }
    }

    // Spatial distances are normalized by the expected cell pitch so the
    // compactness constant is geometry-independent.
    const double pitch = std::sqrt(static_cast<double>(height) * width / k);
    const double spatial_scale = (compactness * compactness) / (pitch * pitch);

    std::vector<int> assignment(static_cast<std::size_t>(height) * width, 0);
    for (int iter = 0; iter < iterations; ++iter) {
        // Assignment: nearest center in joint color+space distance.
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t pi = static_cast<std::size_t>(y) * width + x;
                const std::size_t at = pi * 3;
                double best = std::numeric_limits<double>::infinity();
                int best_c = 0;
                for (int ci = 0; ci < k; ++ci) {
                    const Center& c = centers[static_cast<std::size_t>(ci)];
                    const double dr = pixels[at] - c.r;
                    const double dg = pixels[at + 1] - c.g;
                    const double db = pixels[at + 2] - c.b;
                    const double dx = x - c.x;
                    const double dy = y - c.y;
                    const double d = dr * dr + dg * dg + db * db + spatial_scale * (dx * dx + dy * dy);
                    if (d < best) {
                        best = d;
                        best_c = ci;
                    }
                }
                assignment[pi] = best_c;
            }
        }
        // Update: move each center to the mean of its members.
        std::vector<Center> next(static_cast<std::size_t>(k));
        std::vector<long> count(static_cast<std::size_t>(k), 0);
        for (int y = 0; y < height; ++y) {
            for (int x = 0; x < width; ++x) {
                const std::size_t pi = static_cast<std::size_t>(y) * width + x;
                const std::size_t at = pi * 3;
                Center& c = next[static_cast<std::size_t>(assignment[pi])];
                c.r += pixels[at];
                c.g += pixels[at + 1];
                c.b += pixels[at + 2];
                c.x += x;
                c.y += y;
                ++count[static_cast<std::size_t>(assignment[pi])];
            }
        }
        for (int ci = 0; ci < k; ++ci) {
            if (count[static_cast<std::size_t>(ci)] == 0) continue;  // empty cluster keeps its old center
            const double n = static_cast<double>(count[static_cast<std::size_t>(ci)]);
            Center& c = next[static_cast<std::size_t>(ci)];
            c.r /= n;
            c.g /= n;
            c.b /= n;
            c.x /= n;
            c.y /= n;
            centers[static_cast<std::size_t>(ci)] = c;
        }
    }

    // Connectivity: keep each label's largest connected component (ties to
    // the earliest in scan order); every other fragment is merged into the
    // neighboring component it touches most.
    const std::size_t n_pixels = static_cast<std::size_t>(height) * width;
    std::vector<int> component(n_pixels, -1);
    struct Fragment {
        int label = 0;
        std::vector<int> pixels;
    };
    std::vector<Fragment> fragments;
    for (std::size_t start = 0; start < n_pixels; ++start) {
        if (component[start] != -1) continue;
        const int comp_id = static_cast<int>(fragments.size());
        Fragment frag;
        frag.label = assignment[start];
        std::deque<int> queue{static_cast<int>(start)};
        component[start] = comp_id;
        while (!queue.empty()) {
            const int pix = queue.front();
            queue.pop_front();
            frag.pixels.push_back(pix);
            const int y = pix / width, x = pix % width;
            const int neighbors[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& nb : neighbors) {
                if (nb[0] < 0 || nb[0] >= height || nb[1] < 0 || nb[1] >= width) continue;
                const std::size_t ni = static_cast<std::size_t>(nb[0]) * width + nb[1];
                if (component[ni] == -1 && assignment[ni] == frag.label) {
                    component[ni] = comp_id;
                    queue.push_back(static_cast<int>(ni));
                }
            }
        }
        fragments.push_back(std::move(frag));
    }

    // Mark the largest fragment per label as its keeper.
    std::vector<int> keeper(static_cast<std::size_t>(k), -1);
    for (std::size_t f = 0; f < fragments.size(); ++f) {
        const int label = fragments[f].label;
        if (keeper[static_cast<std::size_t>(label)] == -1 ||
            fragments[f].pixels.size() >
                fragments[static_cast<std::size_t>(keeper[static_cast<std::size_t>(label)])].pixels.size()) {
            keeper[static_cast<std::size_t>(label)] = static_cast<int>(f);
        }
    }

    // Orphan fragments adopt the adjacent keeper component they touch most
    // often (ties to the smallest component id). Later fragments see
    // earlier reassignments, which keeps the result connected.
    std::vector<bool> is_keeper(fragments.size(), false);
    for (int label = 0; label < k; ++label) {
        if (keeper[static_cast<std::size_t>(label)] != -1) is_keeper[static_cast<std::size_t>(keeper[static_cast<std::size_t>(label)])] = true;
    }
    for (std::size_t f = 0; f < fragments.size(); ++f) {
        if (is_keeper[f]) continue;
        std::vector<long> touch(fragments.size(), 0);
        for (int pix : fragments[f].pixels) {
            const int y = pix / width, x = pix % width;
            const int neighbors[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& nb : neighbors) {
                if (nb[0] < 0 || nb[0] >= height || nb[1] < 0 || nb[1] >= width) continue;
                const std::size_t ni = static_cast<std::size_t>(nb[0]) * width + nb[1];
                const int oc = component[ni];
                if (static_cast<std::size_t>(oc) != f && is_keeper[static_cast<std::size_t>(oc)]) {
                    ++touch[static_cast<std::size_t>(oc)];
                }
            }
        }
        int best = -1;
        for (std::size_t oc = 0; oc < touch.size(); ++oc) {
            if (touch[oc] > 0 && (best == -1 || touch[oc] > touch[static_cast<std::size_t>(best)])) {
                best = static_cast<int>(oc);
            }
        }
        if (best == -1) {
            // No keeper contact (possible for nested fragments): fall back
            // to any adjacent component, which must exist for k >= 2.
            for (int pix : fragments[f].pixels) {
                const int y = pix / width, x = pix % width;
                const int neighbors[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
                for (const auto& nb : neighbors) {
                    if (nb[0] < 0 || nb[0] >= height || nb[1] < 0 || nb[1] >= width) continue;
                    const std::size_t ni = static_cast<std::size_t>(nb[0]) * width + nb[1];
                    if (component[ni] != static_cast<int>(f)) {
                        best = component[ni];
                        break;
                    }
                }
                if (best != -1) break;
            }
        }
        if (best == -1) break;  // single fragment covering the image; nothing to merge into
        for (int pix : fragments[f].pixels) component[static_cast<std::size_t>(pix)] = best;
        // Absorb the pixel list so later orphans can see this merge.
        auto& target = fragments[static_cast<std::size_t>(best)].pixels;
        target.insert(target.end(), fragments[f].pixels.begin(), fragments[f].pixels.end());
        fragments[f].pixels.clear();
    }

    // Compact the surviving components into dense region ids by scan order.
    SuperpixelMap map;
    map.height = height;
    map.width = width;
    map.labels.resize(n_pixels);
    std::vector<int> dense(fragments.size(), -1);
    int next_id = 0;
    for (std::size_t i = 0; i < n_pixels; ++i) {
        const int comp = component[i];
        if (dense[static_cast<std::size_t>(comp)] == -1) dense[static_cast<std::size_t>(comp)] = next_id++;
        map.labels[i] = dense[static_cast<std::size_t>(comp)];
    }
    map.regions = next_id;
    map.rebuild_from_labels();
    compute_region_means(pixels, map);
    return map;
}

std::vector<std::vector<std::uint8_t>> sample_masks(int regions, int n_samples, RngStream& rng) {
    if (regions < 1) throw std::invalid_argument("sample_masks: need at least one region");
    if (n_samples < 1) throw std::invalid_argument("sample_masks: need at least one sample");
    std::vector<std::vector<std::uint8_t>> masks;
    masks.reserve(static_cast<std::size_t>(n_samples));
    masks.emplace_back(static_cast<std::size_t>(regions), std::uint8_t{1});
    for (int s = 1; s < n_samples; ++s) {
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(regions));
        for (auto& bit : mask) bit = rng.bernoulli(0.5) ? 1 : 0;
        masks.push_back(std::move(mask));
    }
    return masks;
}

std::vector<float> apply_mask(const std::vector<float>& pixels, const SuperpixelMap& map,
                              const std::vector<std::uint8_t>& mask) {
    if (mask.size() != static_cast<std::size_t>(map.regions)) {
        throw ShapeError("apply_mask: mask length does not match region count");
    }
    if (pixels.size() != static_cast<std::size_t>(map.height) * map.width * 3) {
        throw ShapeError("apply_mask: pixel buffer does not match map geometry");
    }
    std::vector<float> out = pixels;
    for (int r = 0; r < map.regions; ++r) {
        if (mask[static_cast<std::size_t>(r)]) continue;
        const auto& mean = map.region_mean[static_cast<std::size_t>(r)];
        for (int pix : map.region_pixels[static_cast<std::size_t>(r)]) {
            for (std::size_t c = 0; c < 3; ++c) out[static_cast<std::size_t>(pix) * 3 + c] = mean[c];
        }
    }
    return out;
}

double kernel_weight(const std::vector<std::uint8_t>& mask, double width) {
    if (!(width > 0)) throw std::invalid_argument("kernel_weight: width must be positive");
    if (mask.empty()) throw std::invalid_argument("kernel_weight: empty mask");
    long zeroed = 0;
    for (auto bit : mask) {
        if (!bit) ++zeroed;
    }
    const double d2 = static_cast<double>(zeroed) / static_cast<double>(mask.size());
    return std::exp(-d2 / (width * width));
}

namespace {

/// Solves the SPD system A x = b in place via Cholesky. Returns false when
/// a non-positive pivot shows the matrix is not positive definite.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, int n) {
    for (int j = 0; j < n; ++j) {
        double diag = a[static_cast<std::size_t>(j) * n + j];
        for (int p = 0; p < j; ++p) {
            const double l = a[static_cast<std::size_t>(j) * n + p];
            diag -= l * l;
        }
        if (diag <= 0.0) return false;
        const double root = std::sqrt(diag);
        a[static_cast<std::size_t>(j) * n + j] = root;
        for (int i = j + 1; i < n; ++i) {
            double v = a[static_cast<std::size_t>(i) * n + j];
            for (int p = 0; p < j; ++p) {
                v -= a[static_cast<std::size_t>(i) * n + p] * a[static_cast<std::size_t>(j) * n + p];
            }
            a[static_cast<std::size_t>(i) * n + j] = v / root;
        }
    }
    // forward: L y = b
    for (int i = 0; i < n; ++i) {
        double v = b[static_cast<std::size_t>(i)];
        for (int p = 0; p < i; ++p) v -= a[static_cast<std::size_t>(i) * n + p] * b[static_cast<std::size_t>(p)];
        b[static_cast<std::size_t>(i)] = v / a[static_cast<std::size_t>(i) * n + i];
    }
    // backward: L^T x = y
    for (int i = n - 1; i >= 0; --i) {
        double v = b[static_cast<std::size_t>(i)];
        for (int p = i + 1; p < n; ++p) v -= a[static_cast<std::size_t>(p) * n + i] * b[static_cast<std::size_t>(p)];
        b[static_cast<std::size_t>(i)] = v / a[static_cast<std::size_t>(i) * n + i];
    }
    return true;
}

}  // namespace

Explanation fit_surrogate(const std::vector<std::vector<std::uint8_t>>& masks,
                          const std::vector<double>& responses, const std::vector<double>& weights,
                          double ridge_lambda) {
    if (masks.empty()) throw std::invalid_argument("fit_surrogate: no samples");
    if (masks.size() != responses.size() || masks.size() != weights.size()) {
        throw ShapeError("fit_surrogate: masks, responses and weights must have equal length");
    }
    if (ridge_lambda < 0) throw std::invalid_argument("fit_surrogate: negative ridge penalty");
    const int s = static_cast<int>(masks[0].size());
    for (const auto& m : masks) {
        if (static_cast<int>(m.size()) != s) throw ShapeError("fit_surrogate: inconsistent mask lengths");
    }
    double weight_sum = 0;
    for (double w : weights) {
        if (w < 0 || !std::isfinite(w)) throw std::invalid_argument("fit_surrogate: weights must be finite and non-negative");
        weight_sum += w;
    }
    if (weight_sum <= 0) throw std::invalid_argument("fit_surrogate: all sample weights are zero");

    // Weighted feature means and response mean.
    std::vector<double> z_mean(static_cast<std::size_t>(s), 0.0);
    double y_mean = 0;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const double w = weights[i];
        y_mean += w * responses[i];
        for (int j = 0; j < s; ++j) z_mean[static_cast<std::size_t>(j)] += w * masks[i][static_cast<std::size_t>(j)];
    }
    y_mean /= weight_sum;
    for (double& m : z_mean) m /= weight_sum;

    // Normal equations on centered features: (Zc^T W Zc + lambda I) beta = Zc^T W y.
    std::vector<double> a(static_cast<std::size_t>(s) * s, 0.0);
    std::vector<double> b(static_cast<std::size_t>(s), 0.0);
    std::vector<double> zc(static_cast<std::size_t>(s));
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const double w = weights[i];
        if (w == 0) continue;
        for (int j = 0; j < s; ++j) zc[static_cast<std::size_t>(j)] = masks[i][static_cast<std::size_t>(j)] - z_mean[static_cast<std::size_t>(j)];
        for (int j = 0; j < s; ++j) {
            const double wz = w * zc[static_cast<std::size_t>(j)];
            b[static_cast<std::size_t>(j)] += wz * responses[i];
            for (int l = j; l < s; ++l) {
                a[static_cast<std::size_t>(j) * s + l] += wz * zc[static_cast<std::size_t>(l)];
            }
        }
    }
    for (int j = 0; j < s; ++j) {
        for (int l = 0; l < j; ++l) a[static_cast<std::size_t>(j) * s + l] = a[static_cast<std::size_t>(l) * s + j];
        a[static_cast<std::size_t>(j) * s + j] += ridge_lambda;
    }

    if (!cholesky_solve(a, b, s)) {
        throw SingularSystemError("fit_surrogate: rank-deficient system with no ridge penalty");
    }

    Explanation e;
    e.coefficients = std::move(b);
    // The fit lives in the centered basis y ~ intercept + beta . (z - z_mean),
    // so the unpenalized intercept is simply the weighted mean response.
    e.intercept = y_mean;
    e.ridge_lambda = ridge_lambda;
    e.sample_count = static_cast<int>(masks.size());
    return e;
}

std::vector<int> top_regions(const Explanation& e, int k) {
    if (k < 0) throw std::invalid_argument("top_regions: negative count");
    std::vector<int> order(e.coefficients.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return e.coefficients[static_cast<std::size_t>(a)] > e.coefficients[static_cast<std::size_t>(b)];
    });
    std::vector<int> out;
    for (int r : order) {
        if (static_cast<int>(out.size()) >= k) break;
        if (e.coefficients[static_cast<std::size_t>(r)] <= 0) break;
        out.push_back(r);
    }
    return out;
}

ExplanationResult explain_image(const std::vector<float>& pixels, int height, int width,
                                int target_class, const ModelFn& model, const ExplainConfig& cfg) {
    if (!model) throw std::invalid_argument("explain_image: no model callback");
    if (cfg.samples < 1) throw std::invalid_argument("explain_image: need at least one sample");

    ExplanationResult result;
    result.map = (cfg.segmenter == ExplainConfig::Segmenter::Grid)
                     ? segment_grid(pixels, height, width, cfg.grid)
                     : segment_slic_lite(pixels, height, width, cfg.target_regions, cfg.compactness,
                                         cfg.iterations);

    RngStream rng(derive_seed(cfg.seed, 0x11e));
    const auto masks = sample_masks(result.map.regions, cfg.samples, rng);

    std::vector<double> responses(masks.size());
    std::vector<double> weights(masks.size());
    for (std::size_t i = 0; i < masks.size(); ++i) {
        const auto perturbed = apply_mask(pixels, result.map, masks[i]);
        responses[i] = model(perturbed);
        weights[i] = kernel_weight(masks[i], cfg.kernel_width);
    }

    result.explanation = fit_surrogate(masks, responses, weights, cfg.ridge_lambda);
    result.explanation.target_class = target_class;
    result.explanation.kernel_width = cfg.kernel_width;
    result.explanation.seed = cfg.seed;
    return result;
}

image::RasterU8 render_overlay(const std::vector<float>& pixels, int height, int width,
                               const SuperpixelMap& map, const std::vector<int>& region_ids) {
    check_pixel_buffer(pixels, height, width);
    if (map.height != height || map.width != width) {
        throw ShapeError("render_overlay: map geometry does not match image");
    }
    image::RasterU8 raster = image::from_float_rgb(pixels, height, width);

    constexpr double kAlpha = 0.4;
    constexpr std::array<std::uint8_t, 3> kGreen = {0, 255, 0};
    constexpr std::array<std::uint8_t, 3> kYellow = {255, 255, 0};

    auto blend = [&](int pix, const std::array<std::uint8_t, 3>& tint) {
        std::uint8_t* p = raster.rgb.data() + static_cast<std::size_t>(pix) * 3;
        for (int c = 0; c < 3; ++c) {
            const double v = (1.0 - kAlpha) * p[c] + kAlpha * tint[static_cast<std::size_t>(c)];
            p[c] = static_cast<std::uint8_t>(std::lround(v));
        }
    };

    for (std::size_t rank = 0; rank < region_ids.size(); ++rank) {
        const int r = region_ids[rank];
        if (r < 0 || r >= map.regions) {
            throw std::out_of_range("render_overlay: region id " + std::to_string(r) + " outside [0, " +
                                    std::to_string(map.regions) + ")");
        }
        const auto& tint = (rank == 0) ? kGreen : kYellow;
        for (int pix : map.region_pixels[static_cast<std::size_t>(r)]) blend(pix, tint);
    }

    // Solid boundary around the top region: any of its pixels with a
    // 4-neighbor in a different region.
    if (!region_ids.empty()) {
        const int top = region_ids[0];
        for (int pix : map.region_pixels[static_cast<std::size_t>(top)]) {
            const int y = pix / width, x = pix % width;
            bool edge = false;
            const int neighbors[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
            for (const auto& nb : neighbors) {
                if (nb[0] < 0 || nb[0] >= height || nb[1] < 0 || nb[1] >= width) continue;
                if (map.labels[static_cast<std::size_t>(nb[0]) * width + nb[1]] != top) {
                    edge = true;
                    break;
                }
            }
            if (edge) {
                std::uint8_t* p = raster.rgb.data() + static_cast<std::size_t>(pix) * 3;
                p[0] = kGreen[0];
                p[1] = kGreen[1];
                p[2] = kGreen[2];
            }
        }
    }
    return raster;
}

}  // namespace wbc::explain
