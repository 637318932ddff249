#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wbc/errors.hpp"
#include "wbc/nn/ops.hpp"
#include "wbc/nn/tensor.hpp"
#include "wbc/rng.hpp"

namespace wbc::nn {

enum class LayerKind : std::uint8_t {
    Conv2d = 0,
    MaxPool2d = 1,
    Relu = 2,
    Dense = 3,
    Dropout = 4,
    Softmax = 5,
};

/// Declarative layer description. A network is a plain vector of these; the
/// runtime graph, the checkpoint codec and the config layer all speak this
/// type so an architecture can be rebuilt exactly from its description.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int filters = 0;      // conv2d
    int kernel = 0;       // conv2d
    int stride = 1;       // conv2d
    int padding = 0;      // conv2d
    int window = 0;       // maxpool2d
    int pool_stride = 0;  // maxpool2d
    int units = 0;        // dense
    double rate = 0.0;    // dropout

    static LayerSpec conv2d(int filters, int kernel, int stride = 1, int padding = 0) {
        LayerSpec s;
        s.kind = LayerKind::Conv2d;
        s.filters = filters;
        s.kernel = kernel;
        s.stride = stride;
        s.padding = padding;
        return s;
    }
    static LayerSpec maxpool2d(int window, int stride) {
        LayerSpec s;
        s.kind = LayerKind::MaxPool2d;
        s.window = window;
        s.pool_stride = stride;
        return s;
    }
    static LayerSpec relu() {
        LayerSpec s;
        s.kind = LayerKind::Relu;
        return s;
    }
    static LayerSpec dense(int units) {
        LayerSpec s;
        s.kind = LayerKind::Dense;
        s.units = units;
        return s;
    }
    static LayerSpec dropout(double rate) {
        if (rate < 0.0 || rate >= 1.0) {
            throw std::invalid_argument("dropout spec: rate must lie in [0, 1), got " + std::to_string(rate));
        }
        LayerSpec s;
        s.kind = LayerKind::Dropout;
        s.rate = rate;
        return s;
    }
    static LayerSpec softmax() {
        LayerSpec s;
        s.kind = LayerKind::Softmax;
        return s;
    }
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Dense: return "dense";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

namespace detail {

/// Runtime layer: forward caches whatever backward will need; backward
/// accumulates parameter gradients in place and returns the input gradient.
template <typename T>
class LayerNode {
public:
    explicit LayerNode(LayerSpec spec) : spec_(spec) {}
    virtual ~LayerNode() = default;

    virtual Tensor<T> forward(const Tensor<T>& input, Mode mode, RngStream& rng) = 0;
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual std::vector<Tensor<T>*> parameters() { return {}; }

    const LayerSpec& spec() const { return spec_; }

protected:
    LayerSpec spec_;
};

template <typename T>
class Conv2dNode final : public LayerNode<T> {
public:
    Conv2dNode(LayerSpec spec, int in_channels, RngStream& init_rng) : LayerNode<T>(spec) {
        const int k = spec.kernel;
        kernels_ = Tensor<T>({spec.filters, in_channels, k, k});
        bias_ = Tensor<T>({spec.filters});
        const double fan_in = static_cast<double>(in_channels) * k * k;
        const double stddev = std::sqrt(2.0 / fan_in);
        for (T& v : kernels_.values) v = static_cast<T>(init_rng.normal(0.0, stddev));
        kernels_.alloc_grad();
        bias_.alloc_grad();
    }

    Tensor<T> forward(const Tensor<T>& input, Mode, RngStream&) override {
        input_ = input;
        return conv2d(input, kernels_, bias_.values, this->spec_.stride, this->spec_.padding);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(input_.shape);
        conv2d_backward(input_, kernels_, grad_out, this->spec_.stride, this->spec_.padding,
                        &grad_in.values, &kernels_.grad, &bias_.grad);
        return grad_in;
    }

    std::vector<Tensor<T>*> parameters() override { return {&kernels_, &bias_}; }

private:
    Tensor<T> kernels_, bias_, input_;
};

template <typename T>
class MaxPoolNode final : public LayerNode<T> {
public:
    explicit MaxPoolNode(LayerSpec spec) : LayerNode<T>(spec) {}

    Tensor<T> forward(const Tensor<T>& input, Mode, RngStream&) override {
        input_shape_ = input.shape;
        input_size_ = input.size();
        auto result = maxpool2d(input, this->spec_.window, this->spec_.pool_stride);
        argmax_ = std::move(result.argmax);
        return std::move(result.output);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(input_shape_);
        maxpool2d_backward(input_size_, argmax_, grad_out, &grad_in.values);
        return grad_in;
    }

private:
    std::vector<int> input_shape_;
    std::size_t input_size_ = 0;
    std::vector<std::int64_t> argmax_;
};

template <typename T>
class ReluNode final : public LayerNode<T> {
public:
    explicit ReluNode(LayerSpec spec) : LayerNode<T>(spec) {}

    Tensor<T> forward(const Tensor<T>& input, Mode, RngStream&) override {
        input_ = input;
        return relu(input);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(input_.shape);
        relu_backward(input_, grad_out, &grad_in.values);
        return grad_in;
    }

private:
    Tensor<T> input_;
};

template <typename T>
class DenseNode final : public LayerNode<T> {
public:
    DenseNode(LayerSpec spec, int in_features, RngStream& init_rng) : LayerNode<T>(spec) {
        weights_ = Tensor<T>({in_features, spec.units});
        bias_ = Tensor<T>({spec.units});
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_features));
        for (T& v : weights_.values) v = static_cast<T>(init_rng.normal(0.0, stddev));
        weights_.alloc_grad();
        bias_.alloc_grad();
    }

    Tensor<T> forward(const Tensor<T>& input, Mode, RngStream&) override {
        input_ = input;  // keeps original shape; dense() reads it flat
        return dense(input, weights_, bias_.values);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(input_.shape);
        dense_backward(input_, weights_, grad_out, &grad_in.values, &weights_.grad, &bias_.grad);
        return grad_in;
    }

    std::vector<Tensor<T>*> parameters() override { return {&weights_, &bias_}; }

private:
    Tensor<T> weights_, bias_, input_;
};

template <typename T>
class DropoutNode final : public LayerNode<T> {
public:
    explicit DropoutNode(LayerSpec spec) : LayerNode<T>(spec) {}

    Tensor<T> forward(const Tensor<T>& input, Mode mode, RngStream& rng) override {
        train_pass_ = (mode == Mode::Train && this->spec_.rate > 0.0);
        return dropout(input, this->spec_.rate, mode, rng, &mask_);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(grad_out.shape);
        if (train_pass_) {
            dropout_backward(mask_, this->spec_.rate, grad_out, &grad_in.values);
        } else {
            grad_in.values = grad_out.values;
        }
        return grad_in;
    }

private:
    std::vector<std::uint8_t> mask_;
    bool train_pass_ = false;
};

template <typename T>
class SoftmaxNode final : public LayerNode<T> {
public:
    explicit SoftmaxNode(LayerSpec spec) : LayerNode<T>(spec) {}

    Tensor<T> forward(const Tensor<T>& input, Mode, RngStream&) override {
        output_ = softmax(input);
        return output_;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) override {
        Tensor<T> grad_in(output_.shape);
        softmax_backward(output_, grad_out, &grad_in.values);
        return grad_in;
    }

private:
    Tensor<T> output_;
};

}  // namespace detail

/// Sequential network with reverse-mode gradients. Construction performs
/// full shape inference over the layer specs (rejecting geometry that
/// collapses below 1x1) and draws He-normal initial parameters from the
/// given seed, so two graphs built from the same specs and seed are
/// identical. forward() caches activations layer by layer;
/// backward(label) consumes that cache and accumulates d(loss)/d(param)
/// into every parameter's grad buffer.
template <typename T>
class ComputeGraph {
public:
    ComputeGraph(std::vector<LayerSpec> specs, std::array<int, 3> input_shape, std::uint64_t init_seed)
        : specs_(std::move(specs)), input_shape_(input_shape) {
        RngStream init_rng(init_seed);
        std::vector<int> shape = {input_shape_[0], input_shape_[1], input_shape_[2]};
        for (std::size_t li = 0; li < specs_.size(); ++li) {
            const LayerSpec& s = specs_[li];
            const std::string where = "layer " + std::to_string(li) + " (" + layer_kind_name(s.kind) + ")";
            switch (s.kind) {
                case LayerKind::Conv2d: {
                    if (shape.size() != 3) throw GeometryError(where + ": needs a 3-d input");
                    detail::check_conv_geometry(shape[1], shape[2], s.kernel, s.stride, s.padding);
                    const int h = (shape[1] + 2 * s.padding - s.kernel) / s.stride + 1;
                    const int w = (shape[2] + 2 * s.padding - s.kernel) / s.stride + 1;
                    layers_.push_back(std::make_unique<detail::Conv2dNode<T>>(s, shape[0], init_rng));
                    shape = {s.filters, h, w};
                    break;
                }
                case LayerKind::MaxPool2d: {
                    if (shape.size() != 3) throw GeometryError(where + ": needs a 3-d input");
                    if (s.window > shape[1] || s.window > shape[2]) {
                        throw GeometryError(where + ": window " + std::to_string(s.window) +
                                            " exceeds feature map " + std::to_string(shape[1]) + "x" +
                                            std::to_string(shape[2]));
                    }
                    const int h = (shape[1] - s.window) / s.pool_stride + 1;
                    const int w = (shape[2] - s.window) / s.pool_stride + 1;
                    layers_.push_back(std::make_unique<detail::MaxPoolNode<T>>(s));
                    shape = {shape[0], h, w};
                    break;
                }
                case LayerKind::Relu:
                    layers_.push_back(std::make_unique<detail::ReluNode<T>>(s));
                    break;
                case LayerKind::Dense: {
                    int flat = 1;
                    for (int d : shape) flat *= d;
                    layers_.push_back(std::make_unique<detail::DenseNode<T>>(s, flat, init_rng));
                    shape = {s.units};
                    break;
                }
                case LayerKind::Dropout:
                    if (s.rate < 0.0 || s.rate >= 1.0) {
                        throw std::invalid_argument(where + ": rate must lie in [0, 1)");
                    }
                    layers_.push_back(std::make_unique<detail::DropoutNode<T>>(s));
                    break;
                case LayerKind::Softmax:
                    layers_.push_back(std::make_unique<detail::SoftmaxNode<T>>(s));
                    break;
            }
        }
        output_shape_ = shape;
    }

    /// Runs the network and caches activations for a subsequent backward().
    const Tensor<T>& forward(const Tensor<T>& input) {
        if (input.shape != std::vector<int>{input_shape_[0], input_shape_[1], input_shape_[2]}) {
            throw ShapeError("forward: input shape " + Tensor<T>::shape_string(input.shape) +
                             " does not match graph input " +
                             Tensor<T>::shape_string({input_shape_[0], input_shape_[1], input_shape_[2]}));
        }
        Tensor<T> x = input;
        for (auto& layer : layers_) x = layer->forward(x, mode_, dropout_rng_);
        output_ = std::move(x);
        forward_cached_ = true;
        return output_;
    }

    /// forward + cross-entropy against `label` (the final layer must emit
    /// probabilities, i.e. end in softmax).
    T forward_loss(const Tensor<T>& input, int label) {
        return cross_entropy(forward(input), label);
    }

    /// Backpropagates the cross-entropy gradient for `label` through the
    /// cached activations. Parameter gradients accumulate; the return value
    /// is d(loss)/d(input). The cache is consumed: a second backward
    /// without a fresh forward is an error.
    Tensor<T> backward(int label) {
        if (!forward_cached_) throw TrainingError("backward: no cached forward pass");
        Tensor<T> grad(output_.shape);
        cross_entropy_backward(output_, label, &grad.values);
        return backward_from(std::move(grad));
    }

    /// Backpropagates an arbitrary gradient of the network output.
    Tensor<T> backward_from(Tensor<T> grad_output) {
        if (!forward_cached_) throw TrainingError("backward: no cached forward pass");
        forward_cached_ = false;
        Tensor<T> g = std::move(grad_output);
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
        return g;
    }

    void set_mode(Mode m) { mode_ = m; }
    Mode mode() const { return mode_; }

    /// Seeds the stream feeding dropout masks; training re-seeds this
    /// deterministically so whole runs replay exactly.
    void seed_dropout(std::uint64_t seed) { dropout_rng_.reseed(seed); }

    std::vector<Tensor<T>*> parameters() {
        std::vector<Tensor<T>*> out;
        for (auto& layer : layers_) {
            for (Tensor<T>* p : layer->parameters()) out.push_back(p);
        }
        return out;
    }

    void zero_grads() {
        for (Tensor<T>* p : parameters()) p->zero_grad();
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (Tensor<T>* p : parameters()) n += p->size();
        return n;
    }

    const std::vector<LayerSpec>& specs() const { return specs_; }
    const std::array<int, 3>& input_shape() const { return input_shape_; }
    const std::vector<int>& output_shape() const { return output_shape_; }
    const Tensor<T>& last_output() const { return output_; }

private:
    std::vector<LayerSpec> specs_;
    std::array<int, 3> input_shape_;
    std::vector<int> output_shape_;
    std::vector<std::unique_ptr<detail::LayerNode<T>>> layers_;
    Tensor<T> output_;
    bool forward_cached_ = false;
    Mode mode_ = Mode::Eval;
    RngStream dropout_rng_{0};
};

}  // namespace wbc::nn
