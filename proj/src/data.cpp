#include "wbc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "wbc/errors.hpp"
#include "wbc/fsio.hpp"

namespace wbc::data {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool parse_number(const char* begin, const char* end, double& out) {
    // trim surrounding spaces / CR
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    if (begin == end) return false;
    const auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc{} && result.ptr == end;
}

std::string row_context(const std::string& path, std::size_t row) {
    return path + ", row " + std::to_string(row);
}

}  // namespace

std::array<long, kNumClasses> Dataset::class_counts() const {
    std::array<long, kNumClasses> counts{};
    for (const auto& img : images) counts[static_cast<std::size_t>(img.label)]++;
    return counts;
}

void Dataset::rebuild_index() {
    for (auto& v : per_class_index) v.clear();
    for (std::size_t i = 0; i < images.size(); ++i) {
        const int label = images[i].label;
        if (label < 0 || label >= kNumClasses) {
            throw DataFormatError("label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(kNumClasses) + ") at image " + std::to_string(i));
        }
        per_class_index[static_cast<std::size_t>(label)].push_back(static_cast<int>(i));
    }
}

Dataset load_csv_dataset(const std::string& path, int height, int width) {
    if (height <= 0 || width <= 0) throw GeometryError("load_csv_dataset: non-positive geometry");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    const std::size_t pixel_count = static_cast<std::size_t>(height) * width * 3;
    const std::size_t expected_cells = pixel_count + 1;

    Dataset ds;
    ds.height = height;
    ds.width = width;

    std::string line;
    std::size_t row = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;

        // Header detection: a non-numeric first cell on the first line.
        if (first_data_line) {
            const std::size_t comma = line.find(',');
            const std::string head = line.substr(0, comma == std::string::npos ? line.size() : comma);
            double probe;
            if (!parse_number(head.data(), head.data() + head.size(), probe)) {
                first_data_line = false;
                continue;  // skip header row
            }
            first_data_line = false;
        }

        LabeledImage img;
        img.pixels.resize(pixel_count);

        const char* cursor = line.data();
        const char* line_end = line.data() + line.size();
        std::size_t cell = 0;
        while (cursor <= line_end) {
            const char* cell_end = cursor;
            while (cell_end < line_end && *cell_end != ',') ++cell_end;
            if (cell >= expected_cells) {
                throw DataFormatError("too many columns (expected " + std::to_string(expected_cells) +
                                      ") at " + row_context(path, row));
            }
            double value;
            if (!parse_number(cursor, cell_end, value)) {
                throw DataFormatError("non-numeric cell " + std::to_string(cell + 1) + " at " +
                                      row_context(path, row));
            }
            if (cell == 0) {
                if (value != std::floor(value) || value < 0 || value >= kNumClasses) {
                    throw DataFormatError("label " + std::to_string(value) + " outside [0, " +
                                          std::to_string(kNumClasses) + ") at " + row_context(path, row));
                }
                img.label = static_cast<int>(value);
            } else {
                if (value < 0.0 || value > 255.0) {
                    throw DataFormatError("pixel value " + std::to_string(value) +
                                          " outside [0, 255] at " + row_context(path, row));
                }
                img.pixels[cell - 1] = static_cast<float>(value / 255.0);
            }
            ++cell;
            if (cell_end == line_end) break;
            cursor = cell_end + 1;
        }
        if (cell != expected_cells) {
            throw DataFormatError("expected " + std::to_string(expected_cells) + " columns, found " +
                                  std::to_string(cell) + " at " + row_context(path, row));
        }
        ds.images.push_back(std::move(img));
    }
    ds.rebuild_index();
    return ds;
}

void write_csv_dataset(const Dataset& ds, const std::string& path) {
    std::string out;
    out.reserve(ds.images.size() * (ds.images.empty() ? 16 : ds.images[0].pixels.size() * 4 + 8));
    char buf[16];
    for (const auto& img : ds.images) {
        int n = std::snprintf(buf, sizeof buf, "%d", img.label);
        out.append(buf, static_cast<std::size_t>(n));
        for (const float p : img.pixels) {
            const long v = std::lround(static_cast<double>(p) * 255.0);
            n = std::snprintf(buf, sizeof buf, ",%ld", v);
            out.append(buf, static_cast<std::size_t>(n));
        }
        out.push_back('\n');
    }
    io::write_file_atomic(path, out);
}

SplitResult stratified_split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (train_fraction < 0.0 || train_fraction > 1.0) {
        throw std::invalid_argument("stratified_split: fraction must lie in [0, 1]");
    }
    SplitResult result;
    result.train.height = result.test.height = ds.height;
    result.train.width = result.test.width = ds.width;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& members = ds.per_class_index[static_cast<std::size_t>(c)];
        if (members.empty()) {
            throw DataFormatError(std::string("stratified_split: class ") + kClassNames[static_cast<std::size_t>(c)] +
                                  " has no images");
        }
        std::vector<int> order = members;
        RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        shuffle(order, rng);
        const auto n_train = static_cast<std::size_t>(
            std::lround(train_fraction * static_cast<double>(order.size())));
        for (std::size_t i = 0; i < order.size(); ++i) {
            Dataset& side = (i < n_train) ? result.train : result.test;
            side.images.push_back(ds.images[static_cast<std::size_t>(order[i])]);
        }
    }
    result.train.rebuild_index();
    result.test.rebuild_index();
    return result;
}

SplitResult preset_split(const Dataset& ds, std::uint64_t seed) {
    SplitResult result;
    result.train.height = result.test.height = ds.height;
    result.train.width = result.test.width = ds.width;
    for (int c = 0; c < kNumClasses; ++c) {
        const auto& members = ds.per_class_index[static_cast<std::size_t>(c)];
        const auto want = static_cast<std::size_t>(kPresetTrainCounts[static_cast<std::size_t>(c)]);
        if (members.size() < want) {
            throw DataFormatError(std::string("preset_split: class ") + kClassNames[static_cast<std::size_t>(c)] +
                                  " has " + std::to_string(members.size()) + " images, preset needs " +
                                  std::to_string(want));
        }
        std::vector<int> order = members;
        RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        shuffle(order, rng);
        for (std::size_t i = 0; i < order.size(); ++i) {
            Dataset& side = (i < want) ? result.train : result.test;
            side.images.push_back(ds.images[static_cast<std::size_t>(order[i])]);
        }
    }
    result.train.rebuild_index();
    result.test.rebuild_index();
    return result;
}

StandardizationStats compute_standardization(const Dataset& train) {
    if (train.images.empty()) throw DataFormatError("compute_standardization: empty training set");
    StandardizationStats stats;
    std::array<double, 3> sum{}, sum_sq{};
    std::size_t per_channel = 0;
    for (const auto& img : train.images) {
        for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.pixels[i + static_cast<std::size_t>(c)];
                sum[static_cast<std::size_t>(c)] += v;
                sum_sq[static_cast<std::size_t>(c)] += v * v;
            }
        }
        per_channel += img.pixels.size() / 3;
    }
    for (int c = 0; c < 3; ++c) {
        const double n = static_cast<double>(per_channel);
        const double mean = sum[static_cast<std::size_t>(c)] / n;
        const double var = std::max(0.0, sum_sq[static_cast<std::size_t>(c)] / n - mean * mean);
        stats.mean[static_cast<std::size_t>(c)] = mean;
        stats.stddev[static_cast<std::size_t>(c)] = std::max(std::sqrt(var), kStddevFloor);
    }
    return stats;
}

void apply_standardization(std::vector<float>& pixels, const StandardizationStats& stats) {
    for (std::size_t i = 0; i < pixels.size(); i += 3) {
        for (std::size_t c = 0; c < 3; ++c) {
            pixels[i + c] = static_cast<float>((pixels[i + c] - stats.mean[c]) / stats.stddev[c]);
        }
    }
}

void write_stats(const StandardizationStats& stats, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    static constexpr const char* kChannels[3] = {"r", "g", "b"};
    for (int c = 0; c < 3; ++c) out << "mean." << kChannels[c] << "=" << stats.mean[static_cast<std::size_t>(c)] << "\n";
    for (int c = 0; c < 3; ++c) out << "stddev." << kChannels[c] << "=" << stats.stddev[static_cast<std::size_t>(c)] << "\n";
    io::write_file_atomic(path, out.str());
}

StandardizationStats read_stats(const std::string& path) {
    const std::string body = io::read_file(path);
    StandardizationStats stats;
    std::array<bool, 6> seen{};
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataFormatError("malformed stats line in " + path + ": " + line);
        const std::string key = line.substr(0, eq);
        const double value = std::stod(line.substr(eq + 1));
        static constexpr const char* kKeys[6] = {"mean.r", "mean.g", "mean.b", "stddev.r", "stddev.g", "stddev.b"};
        bool matched = false;
        for (int i = 0; i < 6; ++i) {
            if (key == kKeys[i]) {
                if (i < 3) stats.mean[static_cast<std::size_t>(i)] = value;
                else stats.stddev[static_cast<std::size_t>(i - 3)] = value;
                seen[static_cast<std::size_t>(i)] = true;
                matched = true;
                break;
            }
        }
        if (!matched) throw DataFormatError("unknown stats key in " + path + ": " + key);
    }
    for (bool s : seen) {
        if (!s) throw DataFormatError("incomplete stats file " + path);
    }
    return stats;
}

void flip_horizontal(std::vector<float>& pixels, int height, int width) {
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width / 2; ++x) {
            const std::size_t a = (static_cast<std::size_t>(y) * width + x) * 3;
            const std::size_t b = (static_cast<std::size_t>(y) * width + (width - 1 - x)) * 3;
            for (std::size_t c = 0; c < 3; ++c) std::swap(pixels[a + c], pixels[b + c]);
        }
    }
}

void flip_vertical(std::vector<float>& pixels, int height, int width) {
    for (int y = 0; y < height / 2; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t a = (static_cast<std::size_t>(y) * width + x) * 3;
            const std::size_t b = (static_cast<std::size_t>(height - 1 - y) * width + x) * 3;
            for (std::size_t c = 0; c < 3; ++c) std::swap(pixels[a + c], pixels[b + c]);
        }
    }
}

LabeledImage augment_image(const LabeledImage& img, int height, int width,
                           const AugmentationConfig& cfg, RngStream& rng) {
    if (cfg.featurewise_center || cfg.featurewise_std_normalization || cfg.zca_whitening) {
        throw std::invalid_argument("augment_image: featurewise/ZCA options are not supported and must stay off");
    }
    if (cfg.fill_mode != "nearest") {
        throw std::invalid_argument("augment_image: unsupported fill mode '" + cfg.fill_mode + "'");
    }

    // Fixed draw order so a stream seed fully determines the transform.
    const double theta = rng.uniform(-cfg.rotation_range_degrees, cfg.rotation_range_degrees) * kPi / 180.0;
    const double shear = rng.uniform(-cfg.shear_range, cfg.shear_range);
    const double zoom = rng.uniform(1.0 - cfg.zoom_range, 1.0 + cfg.zoom_range);
    const double shift_x = rng.uniform(-cfg.width_shift_range, cfg.width_shift_range) * width;
    const double shift_y = rng.uniform(-cfg.height_shift_range, cfg.height_shift_range) * height;
    const bool do_flip_h = cfg.horizontal_flip && rng.bernoulli(0.5);
    const bool do_flip_v = cfg.vertical_flip && rng.bernoulli(0.5);

    // Forward map about the image center c: p' = Z * Sh * R * (p - c) + c + t.
    // Composed 2x2 forward matrix:
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double sh = std::tan(shear);
    // R = [[cos,-sin],[sin,cos]]; Sh = [[1, sh],[0, 1]]; Z = zoom * I
    const double m00 = zoom * (cos_t + sh * sin_t);
    const double m01 = zoom * (-sin_t + sh * cos_t);
    const double m10 = zoom * sin_t;
    const double m11 = zoom * cos_t;
    const double det = m00 * m11 - m01 * m10;
    if (std::abs(det) < 1e-12) {
        throw GeometryError("augment_image: degenerate affine transform");
    }
    const double i00 = m11 / det, i01 = -m01 / det;
    const double i10 = -m10 / det, i11 = m00 / det;

    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;

    LabeledImage out;
    out.label = img.label;
    out.provenance = Provenance::Augmented;
    out.pixels.resize(img.pixels.size());

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            // Inverse mapping: source = M^-1 * (dest - c - t) + c.
            const double dx = x - cx - shift_x;
            const double dy = y - cy - shift_y;
            const double sx = i00 * dx + i01 * dy + cx;
            const double sy = i10 * dx + i11 * dy + cy;
            // Nearest-neighbor sample with edge clamping.
            long xi = std::lround(sx);
            long yi = std::lround(sy);
            xi = std::clamp(xi, 0L, static_cast<long>(width - 1));
            yi = std::clamp(yi, 0L, static_cast<long>(height - 1));
            const std::size_t src = (static_cast<std::size_t>(yi) * width + static_cast<std::size_t>(xi)) * 3;
            const std::size_t dst = (static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)) * 3;
            out.pixels[dst] = img.pixels[src];
            out.pixels[dst + 1] = img.pixels[src + 1];
            out.pixels[dst + 2] = img.pixels[src + 2];
        }
    }

    if (do_flip_h) flip_horizontal(out.pixels, height, width);
    if (do_flip_v) flip_vertical(out.pixels, height, width);
    return out;
}

Dataset balance_and_expand(const Dataset& train, const AugmentationConfig& cfg) {
    Dataset out;
    out.height = train.height;
    out.width = train.width;
    out.images = train.images;  // originals retained, unchanged, first

    if (!cfg.target_counts.empty()) {
        if (cfg.target_counts.size() != static_cast<std::size_t>(kNumClasses)) {
            throw std::invalid_argument("balance_and_expand: expected " + std::to_string(kNumClasses) +
                                        " target counts, got " + std::to_string(cfg.target_counts.size()));
        }
        const auto counts = train.class_counts();
        for (int c = 0; c < kNumClasses; ++c) {
            const long have = counts[static_cast<std::size_t>(c)];
            const long want = cfg.target_counts[static_cast<std::size_t>(c)];
            if (want < have) {
                throw std::invalid_argument(std::string("balance_and_expand: class ") +
                                            kClassNames[static_cast<std::size_t>(c)] + " already has " +
                                            std::to_string(have) + " images, target " + std::to_string(want) +
                                            " would shrink it");
            }
            if (have == 0 && want > 0) {
                throw DataFormatError(std::string("balance_and_expand: class ") +
                                      kClassNames[static_cast<std::size_t>(c)] + " has no source images");
            }
            const auto& members = train.per_class_index[static_cast<std::size_t>(c)];
            for (long j = 0; j < want - have; ++j) {
                const int src = members[static_cast<std::size_t>(j % have)];
                RngStream rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(j)));
                out.images.push_back(augment_image(train.images[static_cast<std::size_t>(src)],
                                                   train.height, train.width, cfg, rng));
            }
        }
    }
    out.rebuild_index();
    return out;
}

std::vector<long> preset_expansion_targets() {
    // Grows the preset train split (10,175 images) to exactly 50,024:
    // four classes at ceil(50024/5) = 10,005 and the most-populous class
    // (Neutrophil) at 10,004.
    return {10005, 10005, 10005, 10005, 10004};
}

}  // namespace wbc::data
