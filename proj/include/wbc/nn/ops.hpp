#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wbc/errors.hpp"
#include "wbc/nn/tensor.hpp"
#include "wbc/rng.hpp"

namespace wbc::nn {

enum class Mode { Train, Eval };

/// Probability floor inside log() so a zero probability cannot produce an
/// infinite loss or gradient.
inline constexpr double kLogFloor = 1e-12;

namespace detail {

template <typename T>
std::vector<T> pad_channels(const std::vector<T>& in, int channels, int h, int w, int padding) {
    const int hp = h + 2 * padding;
    const int wp = w + 2 * padding;
    std::vector<T> out(static_cast<std::size_t>(channels) * hp * wp, T{0});
    for (int c = 0; c < channels; ++c) {
        const T* src = in.data() + static_cast<std::size_t>(c) * h * w;
        T* dst = out.data() + static_cast<std::size_t>(c) * hp * wp;
        for (int y = 0; y < h; ++y) {
            std::copy(src + static_cast<std::size_t>(y) * w,
                      src + static_cast<std::size_t>(y + 1) * w,
                      dst + (static_cast<std::size_t>(y) + padding) * wp + padding);
        }
    }
    return out;
}

inline void check_conv_geometry(int h, int w, int k, int stride, int padding) {
    if (stride < 1) throw GeometryError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0) throw GeometryError("conv2d: padding must be >= 0, got " + std::to_string(padding));
    if (h + 2 * padding < k || w + 2 * padding < k) {
        throw GeometryError("conv2d: kernel " + std::to_string(k) + "x" + std::to_string(k) +
                            " does not fit padded input " + std::to_string(h + 2 * padding) + "x" +
                            std::to_string(w + 2 * padding));
    }
}

}  // namespace detail

/// 2-d cross-correlation over a (C_in, H, W) input with (C_out, C_in, k, k)
/// kernels and per-output-channel bias. Output spatial size is
/// (H + 2*padding - k) / stride + 1 on each axis.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernels, const std::vector<T>& bias,
                 int stride, int padding) {
    if (input.ndim() != 3) throw ShapeError("conv2d: input must be 3-d, got " + Tensor<T>::shape_string(input.shape));
    if (kernels.ndim() != 4) throw ShapeError("conv2d: kernels must be 4-d, got " + Tensor<T>::shape_string(kernels.shape));
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = kernels.shape[0], k = kernels.shape[2];
    if (kernels.shape[1] != c_in) {
        throw ShapeError("conv2d: kernels expect " + std::to_string(kernels.shape[1]) +
                         " input channels, input has " + std::to_string(c_in));
    }
    if (kernels.shape[3] != k) throw ShapeError("conv2d: kernels must be square");
    if (static_cast<int>(bias.size()) != c_out) {
        throw ShapeError("conv2d: bias length " + std::to_string(bias.size()) +
                         " does not match " + std::to_string(c_out) + " output channels");
    }
    detail::check_conv_geometry(h, w, k, stride, padding);

    const int hp = h + 2 * padding, wp = w + 2 * padding;
    const int h_out = (hp - k) / stride + 1;
    const int w_out = (wp - k) / stride + 1;

    std::vector<T> padded;
    const T* in_data = input.values.data();
    if (padding > 0) {
        padded = detail::pad_channels(input.values, c_in, h, w, padding);
        in_data = padded.data();
    }

    Tensor<T> out({c_out, h_out, w_out});
    for (int oc = 0; oc < c_out; ++oc) {
        T* out_c = out.values.data() + static_cast<std::size_t>(oc) * h_out * w_out;
        std::fill(out_c, out_c + static_cast<std::size_t>(h_out) * w_out, bias[static_cast<std::size_t>(oc)]);
        for (int ic = 0; ic < c_in; ++ic) {
            const T* in_c = in_data + static_cast<std::size_t>(ic) * hp * wp;
            const T* ker = kernels.values.data() + (static_cast<std::size_t>(oc) * c_in + ic) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    const T kv = ker[kh * k + kw];
                    for (int oh = 0; oh < h_out; ++oh) {
                        const T* in_row = in_c + (static_cast<std::size_t>(oh) * stride + kh) * wp + kw;
                        T* out_row = out_c + static_cast<std::size_t>(oh) * w_out;
                        if (stride == 1) {
                            for (int ow = 0; ow < w_out; ++ow) out_row[ow] += kv * in_row[ow];
                        } else {
                            for (int ow = 0; ow < w_out; ++ow) out_row[ow] += kv * in_row[static_cast<std::size_t>(ow) * stride];
                        }
                    }
                }
            }
        }
    }
    return out;
}

/// Accumulates conv2d gradients. Any of the three outputs may be null to
/// skip it; present buffers must already be sized (input.size(),
/// kernels.size(), c_out) and are added to, not overwritten, so batch
/// accumulation is a plain repeated call.
template <typename T>
void conv2d_backward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& grad_out,
                     int stride, int padding, std::vector<T>* grad_input,
                     std::vector<T>* grad_kernels, std::vector<T>* grad_bias) {
    const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
    const int c_out = kernels.shape[0], k = kernels.shape[2];
    const int hp = h + 2 * padding, wp = w + 2 * padding;
    const int h_out = grad_out.shape[1], w_out = grad_out.shape[2];
    if (grad_out.shape[0] != c_out) throw ShapeError("conv2d_backward: grad channel mismatch");
    if (grad_input && grad_input->size() != input.size()) throw ShapeError("conv2d_backward: grad_input size mismatch");
    if (grad_kernels && grad_kernels->size() != kernels.size()) throw ShapeError("conv2d_backward: grad_kernels size mismatch");
    if (grad_bias && static_cast<int>(grad_bias->size()) != c_out) throw ShapeError("conv2d_backward: grad_bias size mismatch");

    if (grad_bias) {
        for (int oc = 0; oc < c_out; ++oc) {
            const T* go = grad_out.values.data() + static_cast<std::size_t>(oc) * h_out * w_out;
            T acc{0};
            for (std::size_t i = 0; i < static_cast<std::size_t>(h_out) * w_out; ++i) acc += go[i];
            (*grad_bias)[static_cast<std::size_t>(oc)] += acc;
        }
    }

    std::vector<T> padded;
    const T* in_data = input.values.data();
    if (padding > 0) {
        padded = detail::pad_channels(input.values, c_in, h, w, padding);
        in_data = padded.data();
    }

    if (grad_kernels) {
        for (int oc = 0; oc < c_out; ++oc) {
            const T* go_c = grad_out.values.data() + static_cast<std::size_t>(oc) * h_out * w_out;
            for (int ic = 0; ic < c_in; ++ic) {
                const T* in_c = in_data + static_cast<std::size_t>(ic) * hp * wp;
                T* gk = grad_kernels->data() + (static_cast<std::size_t>(oc) * c_in + ic) * k * k;
                for (int kh = 0; kh < k; ++kh) {
                    for (int kw = 0; kw < k; ++kw) {
                        T acc{0};
                        for (int oh = 0; oh < h_out; ++oh) {
                            const T* in_row = in_c + (static_cast<std::size_t>(oh) * stride + kh) * wp + kw;
                            const T* go_row = go_c + static_cast<std::size_t>(oh) * w_out;
                            if (stride == 1) {
                                for (int ow = 0; ow < w_out; ++ow) acc += go_row[ow] * in_row[ow];
                            } else {
                                for (int ow = 0; ow < w_out; ++ow) acc += go_row[ow] * in_row[static_cast<std::size_t>(ow) * stride];
                            }
                        }
                        gk[kh * k + kw] += acc;
                    }
                }
            }
        }
    }

    if (grad_input) {
        std::vector<T> gpad(static_cast<std::size_t>(c_in) * hp * wp, T{0});
        for (int oc = 0; oc < c_out; ++oc) {
            const T* go_c = grad_out.values.data() + static_cast<std::size_t>(oc) * h_out * w_out;
            for (int ic = 0; ic < c_in; ++ic) {
                T* gin_c = gpad.data() + static_cast<std::size_t>(ic) * hp * wp;
                const T* ker = kernels.values.data() + (static_cast<std::size_t>(oc) * c_in + ic) * k * k;
                for (int kh = 0; kh < k; ++kh) {
                    for (int kw = 0; kw < k; ++kw) {
                        const T kv = ker[kh * k + kw];
                        for (int oh = 0; oh < h_out; ++oh) {
                            T* gin_row = gin_c + (static_cast<std::size_t>(oh) * stride + kh) * wp + kw;
                            const T* go_row = go_c + static_cast<std::size_t>(oh) * w_out;
                            if (stride == 1) {
                                for (int ow = 0; ow < w_out; ++ow) gin_row[ow] += kv * go_row[ow];
                            } else {
                                for (int ow = 0; ow < w_out; ++ow) gin_row[static_cast<std::size_t>(ow) * stride] += kv * go_row[ow];
                            }
                        }
                    }
                }
            }
        }
        // strip the padding border and accumulate into the caller's buffer
        for (int ic = 0; ic < c_in; ++ic) {
            const T* src = gpad.data() + static_cast<std::size_t>(ic) * hp * wp;
            T* dst = grad_input->data() + static_cast<std::size_t>(ic) * h * w;
            for (int y = 0; y < h; ++y) {
                const T* row = src + (static_cast<std::size_t>(y) + padding) * wp + padding;
                for (int x = 0; x < w; ++x) dst[static_cast<std::size_t>(y) * w + x] += row[x];
            }
        }
    }
}

template <typename T>
struct PoolResult {
    Tensor<T> output;
    std::vector<std::int64_t> argmax;  // flat input index per output element
};

/// Max pooling over square windows. Ties inside a window resolve to the
/// lexicographically smallest (row, col) coordinate so the backward routing
/// is unambiguous.
template <typename T>
PoolResult<T> maxpool2d(const Tensor<T>& input, int window, int stride) {
    if (input.ndim() != 3) throw ShapeError("maxpool2d: input must be 3-d");
    const int c = input.shape[0], h = input.shape[1], w = input.shape[2];
    if (window < 1 || stride < 1) throw GeometryError("maxpool2d: window and stride must be >= 1");
    if (window > h || window > w) {
        throw GeometryError("maxpool2d: window " + std::to_string(window) + " exceeds input " +
                            std::to_string(h) + "x" + std::to_string(w));
    }
    const int h_out = (h - window) / stride + 1;
    const int w_out = (w - window) / stride + 1;

    PoolResult<T> result{Tensor<T>({c, h_out, w_out}), {}};
    result.argmax.resize(result.output.size());
    for (int ch = 0; ch < c; ++ch) {
        const T* in_c = input.values.data() + static_cast<std::size_t>(ch) * h * w;
        for (int oh = 0; oh < h_out; ++oh) {
            for (int ow = 0; ow < w_out; ++ow) {
                const int y0 = oh * stride, x0 = ow * stride;
                T best = in_c[static_cast<std::size_t>(y0) * w + x0];
                std::int64_t best_idx = static_cast<std::int64_t>(y0) * w + x0;
                for (int dy = 0; dy < window; ++dy) {
                    for (int dx = 0; dx < window; ++dx) {
                        const std::int64_t idx = static_cast<std::int64_t>(y0 + dy) * w + (x0 + dx);
                        const T v = in_c[idx];
                        if (v > best) {  // strict: first (row-major) max wins ties
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t out_idx = (static_cast<std::size_t>(ch) * h_out + oh) * w_out + ow;
                result.output.values[out_idx] = best;
                result.argmax[out_idx] = static_cast<std::int64_t>(ch) * h * w + best_idx;
            }
        }
    }
    return result;
}

/// Routes each output gradient to the single input position that produced
/// the max; everything else receives zero. Accumulates into grad_input.
template <typename T>
void maxpool2d_backward(std::size_t input_size, const std::vector<std::int64_t>& argmax,
                        const Tensor<T>& grad_out, std::vector<T>* grad_input) {
    if (grad_input->size() != input_size) throw ShapeError("maxpool2d_backward: grad_input size mismatch");
    if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2d_backward: argmax/grad size mismatch");
    for (std::size_t i = 0; i < argmax.size(); ++i) {
        (*grad_input)[static_cast<std::size_t>(argmax[i])] += grad_out.values[i];
    }
}

/// Fully connected layer: out[j] = sum_i in[i] * weights[i][j] + bias[j].
/// The input tensor is read as a flat vector of length weights.shape[0].
template <typename T>
Tensor<T> dense(const Tensor<T>& input, const Tensor<T>& weights, const std::vector<T>& bias) {
    if (weights.ndim() != 2) throw ShapeError("dense: weights must be 2-d");
    const int n = weights.shape[0], m = weights.shape[1];
    if (static_cast<int>(input.size()) != n) {
        throw ShapeError("dense: input length " + std::to_string(input.size()) +
                         " does not match weight rows " + std::to_string(n));
    }
    if (static_cast<int>(bias.size()) != m) throw ShapeError("dense: bias length mismatch");

    Tensor<T> out({m});
    std::copy(bias.begin(), bias.end(), out.values.begin());
    const T* in = input.values.data();
    const T* wt = weights.values.data();
    T* o = out.values.data();
    for (int i = 0; i < n; ++i) {
        const T v = in[i];
        const T* row = wt + static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) o[j] += v * row[j];
    }
    return out;
}

template <typename T>
void dense_backward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& grad_out,
                    std::vector<T>* grad_input, std::vector<T>* grad_weights,
                    std::vector<T>* grad_bias) {
    const int n = weights.shape[0], m = weights.shape[1];
    if (static_cast<int>(grad_out.size()) != m) throw ShapeError("dense_backward: grad length mismatch");
    const T* go = grad_out.values.data();
    if (grad_bias) {
        if (static_cast<int>(grad_bias->size()) != m) throw ShapeError("dense_backward: grad_bias size mismatch");
        for (int j = 0; j < m; ++j) (*grad_bias)[j] += go[j];
    }
    if (grad_weights) {
        if (grad_weights->size() != weights.size()) throw ShapeError("dense_backward: grad_weights size mismatch");
        const T* in = input.values.data();
        for (int i = 0; i < n; ++i) {
            const T v = in[i];
            T* row = grad_weights->data() + static_cast<std::size_t>(i) * m;
            for (int j = 0; j < m; ++j) row[j] += v * go[j];
        }
    }
    if (grad_input) {
        if (static_cast<int>(grad_input->size()) != n) throw ShapeError("dense_backward: grad_input size mismatch");
        const T* wt = weights.values.data();
        for (int i = 0; i < n; ++i) {
            const T* row = wt + static_cast<std::size_t>(i) * m;
            T acc{0};
            for (int j = 0; j < m; ++j) acc += row[j] * go[j];
            (*grad_input)[i] += acc;
        }
    }
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
    Tensor<T> out = input;
    for (T& v : out.values) v = v > T{0} ? v : T{0};
    return out;
}

template <typename T>
void relu_backward(const Tensor<T>& input, const Tensor<T>& grad_out, std::vector<T>* grad_input) {
    if (grad_out.size() != input.size() || grad_input->size() != input.size()) {
        throw ShapeError("relu_backward: size mismatch");
    }
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input.values[i] > T{0}) (*grad_input)[i] += grad_out.values[i];
    }
}

/// Inverted dropout: in train mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate), so the expected value of
/// every element is unchanged and eval mode is the identity. The kept/zeroed
/// decision consumes one uniform draw per element in flat order.
template <typename T>
Tensor<T> dropout(const Tensor<T>& input, double rate, Mode mode, RngStream& rng,
                  std::vector<std::uint8_t>* mask_out = nullptr) {
    if (rate < 0.0 || rate >= 1.0) {
        throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::Eval || rate == 0.0) {
        if (mask_out) mask_out->assign(input.size(), 1);
        return input;
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    Tensor<T> out = input;
    if (mask_out) mask_out->assign(input.size(), 1);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (rng.uniform() < rate) {
            out.values[i] = T{0};
            if (mask_out) (*mask_out)[i] = 0;
        } else {
            out.values[i] *= scale;
        }
    }
    return out;
}

template <typename T>
void dropout_backward(const std::vector<std::uint8_t>& mask, double rate, const Tensor<T>& grad_out,
                      std::vector<T>* grad_input) {
    if (mask.size() != grad_out.size() || grad_input->size() != grad_out.size()) {
        throw ShapeError("dropout_backward: size mismatch");
    }
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) (*grad_input)[i] += scale * grad_out.values[i];
    }
}

/// Numerically-stable softmax: the max logit is subtracted before
/// exponentiation, which leaves the result unchanged mathematically and
/// keeps exp() from overflowing.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    if (logits.size() == 0) throw ShapeError("softmax: empty input");
    Tensor<T> out = logits;
    const T max_v = *std::max_element(out.values.begin(), out.values.end());
    T sum{0};
    for (T& v : out.values) {
        v = std::exp(v - max_v);
        sum += v;
    }
    for (T& v : out.values) v /= sum;
    return out;
}

/// dL/dlogit_i = p_i * (g_i - sum_j g_j p_j), where p is the softmax output
/// and g the incoming gradient.
template <typename T>
void softmax_backward(const Tensor<T>& output, const Tensor<T>& grad_out, std::vector<T>* grad_input) {
    if (output.size() != grad_out.size() || grad_input->size() != output.size()) {
        throw ShapeError("softmax_backward: size mismatch");
    }
    T dot{0};
    for (std::size_t i = 0; i < output.size(); ++i) dot += grad_out.values[i] * output.values[i];
    for (std::size_t i = 0; i < output.size(); ++i) {
        (*grad_input)[i] += output.values[i] * (grad_out.values[i] - dot);
    }
}

/// Negative log-likelihood of the true class under a probability vector.
template <typename T>
T cross_entropy(const Tensor<T>& probs, int label) {
    const int k = static_cast<int>(probs.size());
    if (label < 0 || label >= k) {
        throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                                " outside [0, " + std::to_string(k) + ")");
    }
    T sum{0};
    for (T v : probs.values) sum += v;
    if (std::abs(static_cast<double>(sum) - 1.0) > 1e-4) {
        throw std::invalid_argument("cross_entropy: probabilities sum to " + std::to_string(static_cast<double>(sum)));
    }
    return -std::log(probs.values[static_cast<std::size_t>(label)] + static_cast<T>(kLogFloor));
}

/// dL/dp_label = -1 / (p_label + floor); all other entries zero.
template <typename T>
void cross_entropy_backward(const Tensor<T>& probs, int label, std::vector<T>* grad_probs) {
    const int k = static_cast<int>(probs.size());
    if (label < 0 || label >= k) throw std::out_of_range("cross_entropy_backward: label out of range");
    if (grad_probs->size() != probs.size()) throw ShapeError("cross_entropy_backward: size mismatch");
    (*grad_probs)[static_cast<std::size_t>(label)] +=
        -T{1} / (probs.values[static_cast<std::size_t>(label)] + static_cast<T>(kLogFloor));
}

}  // namespace wbc::nn
