#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wbc/data.hpp"
#include "wbc/nn/graph.hpp"
#include "wbc/optim.hpp"

namespace wbc::ensemble {

inline constexpr int kMemberCount = 3;

/// How member probability vectors are merged into one prediction.
enum class Combiner { Average, Weighted, MaxConfidence };

const char* combiner_name(Combiner c);
Combiner combiner_from_name(const std::string& name);

/// Architecture card for one ensemble member. All three members share the
/// same convolutional trunk (32/64/128 3x3 filters, stride 1, padding 1,
/// ReLU, dense 256, dense 5, softmax) and differ only in where pooling and
/// dropout are placed — that placement is each member's regularization
/// identity, so the trio disagrees in useful ways:
///   A: pool after every conv block, dropout 0.25 after each pool
///   B: pool after blocks 2 and 3 only, dropout 0.40 after the dense 256
///   C: pool on the raw input and after block 3, dropout 0.10 after
///      block 1 and 0.50 after the dense 256
struct MemberConfig {
    char id = 'A';
    std::array<int, 3> input_shape{3, 0, 0};  // channels, height, width
    int num_classes = data::kNumClasses;
    std::vector<nn::LayerSpec> layers;
};

MemberConfig member_config(char id, int height, int width);
std::vector<MemberConfig> default_members(int height, int width);

/// Builds the runtime graph for a member; the seed pins the He-normal
/// initialization, so equal (config, seed) pairs produce identical graphs.
nn::ComputeGraph<float> build_member(const MemberConfig& cfg, std::uint64_t init_seed);

/// Standardized model-ready inputs: one CHW tensor per image.
struct PreparedSet {
    std::vector<nn::Tensor<float>> inputs;
    std::vector<int> labels;

    std::size_t size() const { return inputs.size(); }
};

PreparedSet prepare_set(const data::Dataset& ds, const data::StandardizationStats& stats);

/// Converts one raw [0,1] channel-last pixel buffer into a standardized
/// CHW tensor (the single conversion path every consumer shares).
nn::Tensor<float> to_model_input(const std::vector<float>& pixels, int height, int width,
                                 const data::StandardizationStats& stats);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0, train_accuracy = 0;
    double eval_loss = 0, eval_accuracy = 0;
};

struct TrainingRun {
    char member_id = '?';
    optim::Kind optimizer = optim::Kind::Adam;
    std::uint64_t seed = 0;
    std::vector<EpochRecord> epochs;
};

/// Mini-batch training loop: per epoch, shuffle (seeded by (seed, epoch)),
/// run forward/backward over each batch, average the batch gradients and
/// take one optimizer step. Training metrics are accumulated with dropout
/// active; eval metrics come from a separate pass in eval mode. A
/// non-finite loss aborts with epoch/batch context. epochs == 0 is a no-op
/// that leaves the graph untouched.
TrainingRun train_member(nn::ComputeGraph<float>& graph, const PreparedSet& train,
                         const PreparedSet& eval, const optim::Hyperparams& hp, int epochs,
                         int batch_size, std::uint64_t seed);

/// Eval-mode forward pass returning the probability vector (as doubles for
/// downstream combination math).
std::vector<double> predict_member(nn::ComputeGraph<float>& graph, const nn::Tensor<float>& input);

/// Fraction of `set` classified correctly in eval mode.
double member_accuracy(nn::ComputeGraph<float>& graph, const PreparedSet& set);

/// Merges per-member probability vectors. `weights` is required for
/// Weighted (values must be non-negative with a positive sum; they are
/// normalized internally) and ignored otherwise. MaxConfidence picks the
/// member with the largest single component, ties to the lowest member
/// index. Every input must be a probability vector (sum 1 within 1e-6).
std::vector<double> combine(const std::vector<std::vector<double>>& member_probs, Combiner mode,
                            const std::array<double, kMemberCount>* weights = nullptr);

/// weights_i = acc_i / sum(acc); all-zero accuracies fall back to uniform.
std::array<double, kMemberCount> normalize_accuracy_weights(
    const std::array<double, kMemberCount>& accuracies);

/// Measures each member's accuracy on a validation set and normalizes.
std::array<double, kMemberCount> fit_member_weights(
    std::vector<nn::ComputeGraph<float>>& graphs, const PreparedSet& validation);

/// The deployable unit: three trained members plus the combination rule.
struct EnsembleModel {
    std::vector<MemberConfig> configs;
    std::vector<nn::ComputeGraph<float>> graphs;
    Combiner combiner = Combiner::Weighted;
    std::array<double, kMemberCount> weights{1.0 / 3, 1.0 / 3, 1.0 / 3};
    data::StandardizationStats stats;
    std::uint64_t training_seed = 0;

    std::vector<double> predict(const nn::Tensor<float>& input);
    int predict_class(const nn::Tensor<float>& input);
};

}  // namespace wbc::ensemble
