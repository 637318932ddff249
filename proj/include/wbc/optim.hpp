#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "wbc/errors.hpp"
#include "wbc/nn/tensor.hpp"

namespace wbc::optim {

enum class Kind { Sgd, Rmsprop, Adam };

inline const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Sgd: return "sgd";
        case Kind::Rmsprop: return "rmsprop";
        case Kind::Adam: return "adam";
    }
    return "?";
}

/// Update-rule selection plus its constants. The factory functions carry the
/// conventional defaults for each rule (sgd 1e-2; rmsprop/adam 1e-3).
struct Hyperparams {
    Kind kind = Kind::Adam;
    double learning_rate = 1e-3;
    double rho = 0.9;     // rmsprop decay
    double beta1 = 0.9;   // adam first-moment decay
    double beta2 = 0.999; // adam second-moment decay
    double epsilon = 1e-8;

    static Hyperparams sgd(double lr = 1e-2) {
        Hyperparams hp;
        hp.kind = Kind::Sgd;
        hp.learning_rate = lr;
        return hp;
    }
    static Hyperparams rmsprop(double lr = 1e-3, double rho = 0.9, double epsilon = 1e-8) {
        Hyperparams hp;
        hp.kind = Kind::Rmsprop;
        hp.learning_rate = lr;
        hp.rho = rho;
        hp.epsilon = epsilon;
        return hp;
    }
    static Hyperparams adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                            double epsilon = 1e-8) {
        Hyperparams hp;
        hp.kind = Kind::Adam;
        hp.learning_rate = lr;
        hp.beta1 = beta1;
        hp.beta2 = beta2;
        hp.epsilon = epsilon;
        return hp;
    }

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("optimizer: learning rate must be positive");
        if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
        if (kind == Kind::Rmsprop && (rho < 0.0 || rho >= 1.0)) {
            throw std::invalid_argument("optimizer: rho must lie in [0, 1)");
        }
        if (kind == Kind::Adam &&
            (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)) {
            throw std::invalid_argument("optimizer: betas must lie in [0, 1)");
        }
    }
};

/// In-place parameter updates driven by the gradients stored on each tensor.
///
///   sgd:      theta -= lr * g
///   rmsprop:  v = rho*v + (1-rho)*g^2;          theta -= lr * g / (sqrt(v) + eps)
///   adam:     m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2;
///             m^ = m/(1-b1^t); v^ = v/(1-b2^t); theta -= lr * m^ / (sqrt(v^) + eps)
///
/// epsilon sits outside the square root in both adaptive rules. Moment
/// buffers are allocated on the first step() and must match the same
/// parameter list on every later call; the step counter t advances by
/// exactly one per step() regardless of parameter count.
template <typename T>
class Optimizer {
public:
    explicit Optimizer(Hyperparams hp) : hp_(hp) { hp_.validate(); }

    void step(const std::vector<nn::Tensor<T>*>& params) {
        if (!initialized_) {
            if (hp_.kind != Kind::Sgd) {
                v_.resize(params.size());
                for (std::size_t i = 0; i < params.size(); ++i) v_[i].assign(params[i]->size(), T{0});
            }
            if (hp_.kind == Kind::Adam) {
                m_.resize(params.size());
                for (std::size_t i = 0; i < params.size(); ++i) m_[i].assign(params[i]->size(), T{0});
            }
            param_sizes_.reserve(params.size());
            for (const auto* p : params) param_sizes_.push_back(p->size());
            initialized_ = true;
        } else {
            if (params.size() != param_sizes_.size()) {
                throw ShapeError("optimizer: parameter count changed between steps");
            }
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (params[i]->size() != param_sizes_[i]) {
                    throw ShapeError("optimizer: parameter " + std::to_string(i) + " changed size between steps");
                }
            }
        }
        for (const auto* p : params) {
            if (!p->has_grad()) throw ShapeError("optimizer: parameter has no gradient buffer");
        }

        ++t_;
        const T lr = static_cast<T>(hp_.learning_rate);
        const T eps = static_cast<T>(hp_.epsilon);
        switch (hp_.kind) {
            case Kind::Sgd: {
                for (auto* p : params) {
                    for (std::size_t i = 0; i < p->size(); ++i) p->values[i] -= lr * p->grad[i];
                }
                break;
            }
            case Kind::Rmsprop: {
                const T rho = static_cast<T>(hp_.rho);
                for (std::size_t pi = 0; pi < params.size(); ++pi) {
                    auto* p = params[pi];
                    auto& v = v_[pi];
                    for (std::size_t i = 0; i < p->size(); ++i) {
                        const T g = p->grad[i];
                        v[i] = rho * v[i] + (T{1} - rho) * g * g;
                        p->values[i] -= lr * g / (std::sqrt(v[i]) + eps);
                    }
                }
                break;
            }
            case Kind::Adam: {
                const T b1 = static_cast<T>(hp_.beta1);
                const T b2 = static_cast<T>(hp_.beta2);
                const T c1 = T{1} - static_cast<T>(std::pow(hp_.beta1, static_cast<double>(t_)));
                const T c2 = T{1} - static_cast<T>(std::pow(hp_.beta2, static_cast<double>(t_)));
                for (std::size_t pi = 0; pi < params.size(); ++pi) {
                    auto* p = params[pi];
                    auto& m = m_[pi];
                    auto& v = v_[pi];
                    for (std::size_t i = 0; i < p->size(); ++i) {
                        const T g = p->grad[i];
                        m[i] = b1 * m[i] + (T{1} - b1) * g;
                        v[i] = b2 * v[i] + (T{1} - b2) * g * g;
                        const T m_hat = m[i] / c1;
                        const T v_hat = v[i] / c2;
                        p->values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
                    }
                }
                break;
            }
        }
    }

    long step_count() const { return t_; }
    const Hyperparams& hyperparams() const { return hp_; }

private:
    Hyperparams hp_;
    bool initialized_ = false;
    std::vector<std::size_t> param_sizes_;
    std::vector<std::vector<T>> m_, v_;
    long t_ = 0;
};

}  // namespace wbc::optim
