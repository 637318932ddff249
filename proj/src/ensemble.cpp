#include "wbc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wbc/errors.hpp"

namespace wbc::ensemble {

using nn::LayerSpec;

const char* combiner_name(Combiner c) {
    switch (c) {
        case Combiner::Average: return "average";
        case Combiner::Weighted: return "weighted";
        case Combiner::MaxConfidence: return "max_confidence";
    }
    return "?";
}

Combiner combiner_from_name(const std::string& name) {
    if (name == "average") return Combiner::Average;
    if (name == "weighted") return Combiner::Weighted;
    if (name == "max_confidence") return Combiner::MaxConfidence;
    throw ConfigError("unknown combiner '" + name + "' (expected average, weighted or max_confidence)");
}

MemberConfig member_config(char id, int height, int width) {
    MemberConfig cfg;
    cfg.id = id;
    cfg.input_shape = {3, height, width};
    auto conv_block = [](int filters) {
        return std::vector<LayerSpec>{LayerSpec::conv2d(filters, 3, 1, 1), LayerSpec::relu()};
    };
    auto append = [&cfg](std::vector<LayerSpec> block) {
        for (auto& s : block) cfg.layers.push_back(s);
    };
    switch (id) {
        case 'A':
            append(conv_block(32));
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));
            cfg.layers.push_back(LayerSpec::dropout(0.25));
            append(conv_block(64));
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));
            cfg.layers.push_back(LayerSpec::dropout(0.25));
            append(conv_block(128));
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));
            cfg.layers.push_back(LayerSpec::dropout(0.25));
            cfg.layers.push_back(LayerSpec::dense(256));
            cfg.layers.push_back(LayerSpec::relu());
            break;
        case 'B':
            append(conv_block(32));
            append(conv_block(64));
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));
            append(conv_block(128));
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));
            cfg.layers.push_back(LayerSpec::dense(256));
            cfg.layers.push_back(LayerSpec::relu());
            cfg.layers.push_back(LayerSpec::dropout(0.40));
            break;
        case 'C':
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));  // shrink the raw input first
            append(conv_block(32));
            cfg.layers.push_back(LayerSpec::dropout(0.10));
            append(conv_block(64));
            append(conv_block(128));
            cfg.layers.push_back(LayerSpec::maxpool2d(2, 2));
            cfg.layers.push_back(LayerSpec::dense(256));
            cfg.layers.push_back(LayerSpec::relu());
            cfg.layers.push_back(LayerSpec::dropout(0.50));
            break;
        default:
            throw ConfigError(std::string("unknown ensemble member '") + id + "' (expected A, B or C)");
    }
    cfg.layers.push_back(LayerSpec::dense(cfg.num_classes));
    cfg.layers.push_back(LayerSpec::softmax());
    return cfg;
}

std::vector<MemberConfig> default_members(int height, int width) {
    return {member_config('A', height, width), member_config('B', height, width),
            member_config('C', height, width)};
}

nn::ComputeGraph<float> build_member(const MemberConfig& cfg, std::uint64_t init_seed) {
    return nn::ComputeGraph<float>(cfg.layers, cfg.input_shape, init_seed);
}

nn::Tensor<float> to_model_input(const std::vector<float>& pixels, int height, int width,
                                 const data::StandardizationStats& stats) {
    if (pixels.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeError("to_model_input: pixel buffer does not match geometry");
    }
    nn::Tensor<float> t({3, height, width});
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t src = (static_cast<std::size_t>(y) * width + x) * 3;
            for (int c = 0; c < 3; ++c) {
                const double v = (pixels[src + static_cast<std::size_t>(c)] - stats.mean[static_cast<std::size_t>(c)]) /
                                 stats.stddev[static_cast<std::size_t>(c)];
                t.at(c, y, x) = static_cast<float>(v);
            }
        }
    }
    return t;
}

PreparedSet prepare_set(const data::Dataset& ds, const data::StandardizationStats& stats) {
    PreparedSet set;
    set.inputs.reserve(ds.images.size());
    set.labels.reserve(ds.images.size());
    for (const auto& img : ds.images) {
        set.inputs.push_back(to_model_input(img.pixels, ds.height, ds.width, stats));
        set.labels.push_back(img.label);
    }
    return set;
}

namespace {

struct EvalResult {
    double loss = 0, accuracy = 0;
};

EvalResult evaluate_set(nn::ComputeGraph<float>& graph, const PreparedSet& set) {
    EvalResult r;
    if (set.size() == 0) return r;
    const nn::Mode saved = graph.mode();
    graph.set_mode(nn::Mode::Eval);
    long correct = 0;
    double loss_sum = 0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& probs = graph.forward(set.inputs[i]);
        loss_sum += nn::cross_entropy(probs, set.labels[i]);
        const auto best = std::max_element(probs.values.begin(), probs.values.end());
        if (static_cast<int>(best - probs.values.begin()) == set.labels[i]) ++correct;
    }
    graph.set_mode(saved);
    r.loss = loss_sum / static_cast<double>(set.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
    return r;
}

}  // namespace

TrainingRun train_member(nn::ComputeGraph<float>& graph, const PreparedSet& train,
                         const PreparedSet& eval, const optim::Hyperparams& hp, int epochs,
                         int batch_size, std::uint64_t seed) {
    if (epochs < 0) throw std::invalid_argument("train_member: negative epoch count");
    if (batch_size <= 0) throw std::invalid_argument("train_member: batch size must be positive");
    if (train.size() == 0 && epochs > 0) throw TrainingError("train_member: empty training set");

    TrainingRun run;
    run.optimizer = hp.kind;
    run.seed = seed;

    optim::Optimizer<float> optimizer(hp);
    const auto params = graph.parameters();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        RngStream shuffle_rng(derive_seed(seed, 0x5u, static_cast<std::uint64_t>(epoch)));
        shuffle(order, shuffle_rng);
        graph.seed_dropout(derive_seed(seed, 0xdu, static_cast<std::uint64_t>(epoch)));
        graph.set_mode(nn::Mode::Train);

        double loss_sum = 0;
        long correct = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
            graph.zero_grads();
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t sample = order[i];
                const auto& probs = graph.forward(train.inputs[sample]);
                const double loss = nn::cross_entropy(probs, train.labels[sample]);
                if (!std::isfinite(loss)) {
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(start / static_cast<std::size_t>(batch_size)));
                }
                loss_sum += loss;
                const auto best = std::max_element(probs.values.begin(), probs.values.end());
                if (static_cast<int>(best - probs.values.begin()) == train.labels[sample]) ++correct;
                graph.backward(train.labels[sample]);
            }
            // Average the accumulated batch gradient before the update.
            const float inv = 1.0f / static_cast<float>(stop - start);
            for (auto* p : params) {
                for (float& g : p->grad) g *= inv;
            }
            optimizer.step(params);
        }
        graph.set_mode(nn::Mode::Eval);

        EpochRecord record;
        record.epoch = epoch + 1;  // epoch logs and charts are 1-based
        record.train_loss = loss_sum / static_cast<double>(train.size());
        record.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
        const auto ev = evaluate_set(graph, eval);
        record.eval_loss = ev.loss;
        record.eval_accuracy = ev.accuracy;
        run.epochs.push_back(record);
    }
    return run;
}

std::vector<double> predict_member(nn::ComputeGraph<float>& graph, const nn::Tensor<float>& input) {
    const nn::Mode saved = graph.mode();
    graph.set_mode(nn::Mode::Eval);
    const auto& probs = graph.forward(input);
    graph.set_mode(saved);
    return std::vector<double>(probs.values.begin(), probs.values.end());
}

double member_accuracy(nn::ComputeGraph<float>& graph, const PreparedSet& set) {
    if (set.size() == 0) throw std::invalid_argument("member_accuracy: empty set");
    return evaluate_set(graph, set).accuracy;
}

namespace {

void check_probability_vector(const std::vector<double>& p, std::size_t expected_size) {
    if (p.size() != expected_size) throw ShapeError("combine: member outputs disagree in length");
    double sum = 0;
    for (double v : p) {
        if (v < 0) throw std::invalid_argument("combine: negative probability component");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw std::invalid_argument("combine: member output sums to " + std::to_string(sum) +
                                    ", expected 1");
    }
}

}  // namespace

std::vector<double> combine(const std::vector<std::vector<double>>& member_probs, Combiner mode,
                            const std::array<double, kMemberCount>* weights) {
    if (member_probs.size() != static_cast<std::size_t>(kMemberCount)) {
        throw ShapeError("combine: expected " + std::to_string(kMemberCount) + " member outputs, got " +
                         std::to_string(member_probs.size()));
    }
    const std::size_t k = member_probs[0].size();
    for (const auto& p : member_probs) check_probability_vector(p, k);

    std::vector<double> out(k, 0.0);
    switch (mode) {
        case Combiner::Average: {
            for (const auto& p : member_probs) {
                for (std::size_t i = 0; i < k; ++i) out[i] += p[i];
            }
            for (double& v : out) v /= static_cast<double>(kMemberCount);
            break;
        }
        case Combiner::Weighted: {
            if (!weights) throw std::invalid_argument("combine: weighted mode needs member weights");
            double sum = 0;
            for (double w : *weights) {
                if (w < 0 || !std::isfinite(w)) {
                    throw std::invalid_argument("combine: member weights must be finite and non-negative");
                }
                sum += w;
            }
            if (sum <= 0) throw std::invalid_argument("combine: member weights sum to zero");
            for (int m = 0; m < kMemberCount; ++m) {
                const double w = (*weights)[static_cast<std::size_t>(m)] / sum;
                for (std::size_t i = 0; i < k; ++i) out[i] += w * member_probs[static_cast<std::size_t>(m)][i];
            }
            break;
        }
        case Combiner::MaxConfidence: {
            int best_member = 0;
            double best_peak = -1.0;
            for (int m = 0; m < kMemberCount; ++m) {
                const auto& p = member_probs[static_cast<std::size_t>(m)];
                const double peak = *std::max_element(p.begin(), p.end());
                if (peak > best_peak) {  // strict: ties keep the lowest member index
                    best_peak = peak;
                    best_member = m;
                }
            }
            out = member_probs[static_cast<std::size_t>(best_member)];
            break;
        }
    }
    return out;
}

std::array<double, kMemberCount> normalize_accuracy_weights(
    const std::array<double, kMemberCount>& accuracies) {
    double sum = 0;
    for (double a : accuracies) {
        if (a < 0 || a > 1) throw std::invalid_argument("member accuracy outside [0, 1]");
        sum += a;
    }
    std::array<double, kMemberCount> weights{};
    if (sum <= 0) {
        weights.fill(1.0 / kMemberCount);
        return weights;
    }
    for (int i = 0; i < kMemberCount; ++i) weights[static_cast<std::size_t>(i)] = accuracies[static_cast<std::size_t>(i)] / sum;
    return weights;
}

std::array<double, kMemberCount> fit_member_weights(std::vector<nn::ComputeGraph<float>>& graphs,
                                                    const PreparedSet& validation) {
    if (graphs.size() != static_cast<std::size_t>(kMemberCount)) {
        throw ShapeError("fit_member_weights: expected " + std::to_string(kMemberCount) + " members");
    }
    std::array<double, kMemberCount> acc{};
    for (int m = 0; m < kMemberCount; ++m) {
        acc[static_cast<std::size_t>(m)] = member_accuracy(graphs[static_cast<std::size_t>(m)], validation);
    }
    return normalize_accuracy_weights(acc);
}

std::vector<double> EnsembleModel::predict(const nn::Tensor<float>& input) {
    if (graphs.size() != static_cast<std::size_t>(kMemberCount)) {
        throw ShapeError("EnsembleModel: expected " + std::to_string(kMemberCount) + " member graphs");
    }
    std::vector<std::vector<double>> member_probs;
    member_probs.reserve(graphs.size());
    for (auto& g : graphs) member_probs.push_back(predict_member(g, input));
    return combine(member_probs, combiner, &weights);
}

int EnsembleModel::predict_class(const nn::Tensor<float>& input) {
    const auto probs = predict(input);
    return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace wbc::ensemble
