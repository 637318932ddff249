#include "wbc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "wbc/errors.hpp"
#include "wbc/fsio.hpp"

namespace wbc::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

int parse_int(const std::string& key, const std::string& value) {
    int out = 0;
    const auto result = std::from_chars(value.data(), value.data() + value.size(), out);
    if (result.ec != std::errc{} || result.ptr != value.data() + value.size()) {
        throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto result = std::from_chars(value.data(), value.data() + value.size(), out);
    if (result.ec != std::errc{} || result.ptr != value.data() + value.size()) {
        throw ConfigError("config: key '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

data::AugmentationConfig RunConfig::augmentation() const {
    data::AugmentationConfig a;
    a.rotation_range_degrees = augment_rotation_range;
    a.width_shift_range = augment_width_shift;
    a.height_shift_range = augment_height_shift;
    a.shear_range = augment_shear_range;
    a.zoom_range = augment_zoom_range;
    a.horizontal_flip = augment_horizontal_flip;
    a.vertical_flip = augment_vertical_flip;
    a.fill_mode = augment_fill_mode;
    a.target_counts = expansion_targets();
    a.seed = derive_seed(seed, 0xa06);
    return a;
}

std::vector<long> RunConfig::expansion_targets() const {
    if (augment_targets == "none" || augment_targets.empty()) return {};
    if (augment_targets == "replica") return data::preset_expansion_targets();
    std::vector<long> targets;
    std::istringstream in(augment_targets);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        cell = trim(cell);
        try {
            targets.push_back(std::stol(cell));
        } catch (const std::exception&) {
            throw ConfigError("config: augment.targets expects 'none', 'replica' or " +
                              std::to_string(data::kNumClasses) + " integers, got '" + augment_targets + "'");
        }
    }
    if (targets.size() != static_cast<std::size_t>(data::kNumClasses)) {
        throw ConfigError("config: augment.targets needs " + std::to_string(data::kNumClasses) +
                          " values, got " + std::to_string(targets.size()));
    }
    return targets;
}

optim::Hyperparams RunConfig::optimizer_hyperparams() const {
    optim::Hyperparams hp;
    if (optimizer == "sgd") {
        hp = optim::Hyperparams::sgd();
    } else if (optimizer == "rmsprop") {
        hp = optim::Hyperparams::rmsprop();
    } else if (optimizer == "adam") {
        hp = optim::Hyperparams::adam();
    } else {
        throw ConfigError("config: unknown optimizer '" + optimizer + "' (expected sgd, rmsprop or adam)");
    }
    if (learning_rate != "auto") {
        hp.learning_rate = parse_double("train.learning_rate", learning_rate);
    }
    hp.validate();
    return hp;
}

ensemble::Combiner RunConfig::combiner_mode() const {
    return ensemble::combiner_from_name(combiner);
}

explain::ExplainConfig RunConfig::explain_config() const {
    explain::ExplainConfig e;
    if (explain_segmenter == "grid") {
        e.segmenter = explain::ExplainConfig::Segmenter::Grid;
    } else if (explain_segmenter == "slic") {
        e.segmenter = explain::ExplainConfig::Segmenter::SlicLite;
    } else {
        throw ConfigError("config: unknown segmenter '" + explain_segmenter + "' (expected grid or slic)");
    }
    e.grid = explain_grid;
    e.target_regions = explain_regions;
    e.compactness = explain_compactness;
    e.iterations = explain_iterations;
    e.samples = explain_samples;
    e.kernel_width = explain_kernel_width;
    e.ridge_lambda = explain_ridge_lambda;
    e.seed = derive_seed(seed, 0xe7);
    return e;
}

void RunConfig::validate() const {
    if (image_height <= 0 || image_width <= 0) throw ConfigError("config: data.height/data.width must be positive");
    if (split_mode != "fraction" && split_mode != "replica") {
        throw ConfigError("config: split.mode must be 'fraction' or 'replica', got '" + split_mode + "'");
    }
    if (split_fraction < 0.0 || split_fraction > 1.0) {
        throw ConfigError("config: split.fraction must lie in [0, 1]");
    }
    if (epochs < 0) throw ConfigError("config: train.epochs must be >= 0");
    if (batch_size <= 0) throw ConfigError("config: train.batch_size must be positive");
    if (overlay_format != "png" && overlay_format != "ppm") {
        throw ConfigError("config: explain.format must be 'png' or 'ppm'");
    }
    (void)combiner_mode();
    (void)optimizer_hyperparams();
    (void)explain_config();
    (void)expansion_targets();
}

void apply_preset(RunConfig& cfg, const std::string& preset) {
    if (preset == "replica") {
        // full-scale reproduction recipe
        cfg.image_height = cfg.image_width = 64;
        cfg.split_mode = "replica";
        cfg.augment_targets = "replica";
        cfg.epochs = 50;
        cfg.batch_size = 64;
    } else if (preset == "desk") {
        cfg.image_height = cfg.image_width = 28;
        cfg.split_mode = "fraction";
        cfg.split_fraction = 0.8;
        cfg.augment_targets = "none";
        cfg.epochs = 10;
        cfg.batch_size = 32;
    } else {
        throw ConfigError("unknown preset '" + preset + "' (expected replica or desk)");
    }
}

namespace {

using Setter = void (*)(RunConfig&, const std::string&, const std::string&);

struct KeyEntry {
    const char* key;
    Setter set;
    std::string (*get)(const RunConfig&);
};

const KeyEntry kKeys[] = {
    {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
     [](const RunConfig& c) { return std::to_string(c.seed); }},
    {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
     [](const RunConfig& c) { return c.out_dir; }},
    {"data.csv", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset_csv = v; },
     [](const RunConfig& c) { return c.dataset_csv; }},
    {"data.height", [](RunConfig& c, const std::string& k, const std::string& v) { c.image_height = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.image_height); }},
    {"data.width", [](RunConfig& c, const std::string& k, const std::string& v) { c.image_width = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.image_width); }},
    {"split.mode", [](RunConfig& c, const std::string&, const std::string& v) { c.split_mode = v; },
     [](const RunConfig& c) { return c.split_mode; }},
    {"split.fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.split_fraction = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.split_fraction); }},
    {"augment.rotation_range", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_rotation_range = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.augment_rotation_range); }},
    {"augment.width_shift", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_width_shift = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.augment_width_shift); }},
    {"augment.height_shift", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_height_shift = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.augment_height_shift); }},
    {"augment.shear_range", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_shear_range = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.augment_shear_range); }},
    {"augment.zoom_range", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_zoom_range = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.augment_zoom_range); }},
    {"augment.horizontal_flip", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_horizontal_flip = parse_bool(k, v); },
     [](const RunConfig& c) { return std::string(c.augment_horizontal_flip ? "true" : "false"); }},
    {"augment.vertical_flip", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment_vertical_flip = parse_bool(k, v); },
     [](const RunConfig& c) { return std::string(c.augment_vertical_flip ? "true" : "false"); }},
    {"augment.fill_mode", [](RunConfig& c, const std::string&, const std::string& v) { c.augment_fill_mode = v; },
     [](const RunConfig& c) { return c.augment_fill_mode; }},
    {"augment.targets", [](RunConfig& c, const std::string&, const std::string& v) { c.augment_targets = v; },
     [](const RunConfig& c) { return c.augment_targets; }},
    {"ensemble.combiner", [](RunConfig& c, const std::string&, const std::string& v) { c.combiner = v; },
     [](const RunConfig& c) { return c.combiner; }},
    {"train.optimizer", [](RunConfig& c, const std::string&, const std::string& v) { c.optimizer = v; },
     [](const RunConfig& c) { return c.optimizer; }},
    {"train.learning_rate", [](RunConfig& c, const std::string&, const std::string& v) { c.learning_rate = v; },
     [](const RunConfig& c) { return c.learning_rate; }},
    {"train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.epochs); }},
    {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.batch_size); }},
    {"explain.segmenter", [](RunConfig& c, const std::string&, const std::string& v) { c.explain_segmenter = v; },
     [](const RunConfig& c) { return c.explain_segmenter; }},
    {"explain.grid", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_grid = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.explain_grid); }},
    {"explain.regions", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_regions = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.explain_regions); }},
    {"explain.compactness", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_compactness = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.explain_compactness); }},
    {"explain.iterations", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_iterations = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.explain_iterations); }},
    {"explain.samples", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_samples = parse_int(k, v); },
     [](const RunConfig& c) { return std::to_string(c.explain_samples); }},
    {"explain.kernel_width", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_kernel_width = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.explain_kernel_width); }},
    {"explain.lambda", [](RunConfig& c, const std::string& k, const std::string& v) { c.explain_ridge_lambda = parse_double(k, v); },
     [](const RunConfig& c) { return fmt_double(c.explain_ridge_lambda); }},
    {"explain.format", [](RunConfig& c, const std::string&, const std::string& v) { c.overlay_format = v; },
     [](const RunConfig& c) { return c.overlay_format; }},
};

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& entry : kKeys) {
        if (key == entry.key) {
            entry.set(cfg, key, value);
            return;
        }
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

}  // namespace

RunConfig config_from_map(const std::map<std::string, std::string>& kv) {
    RunConfig cfg;
    for (const auto& [key, value] : kv) set_key(cfg, key, value);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    const std::string body = io::read_file(path);
    std::map<std::string, std::string> kv;
    std::istringstream in(body);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + path + " line " + std::to_string(row) + " is not key=value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (kv.count(key)) {
            throw ConfigError("config: duplicate key '" + key + "' in " + path);
        }
        kv[key] = value;
    }
    return config_from_map(kv);
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& key_value_pairs) {
    for (const auto& pair : key_value_pairs) {
        const auto eq = pair.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + pair + "' is not key=value");
        set_key(cfg, trim(pair.substr(0, eq)), trim(pair.substr(eq + 1)));
    }
}

std::string config_to_text(const RunConfig& cfg) {
    std::ostringstream out;
    for (const auto& entry : kKeys) out << entry.key << '=' << entry.get(cfg) << '\n';
    return out.str();
}

void save_config(const RunConfig& cfg, const std::string& path) {
    io::write_file_atomic(path, config_to_text(cfg));
}

}  // namespace wbc::cli
