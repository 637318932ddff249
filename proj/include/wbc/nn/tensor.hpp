#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wbc/errors.hpp"

namespace wbc::nn {

/// Dense n-dimensional array in row-major order with an optional gradient
/// buffer of the same length. The element type is a template parameter so
/// the whole network stack can run in float for training and in double for
/// numerical gradient verification.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;
    std::vector<T> grad;  // empty until alloc_grad()

    Tensor() = default;

    explicit Tensor(std::vector<int> dims)
        : shape(std::move(dims)), values(checked_size(shape), T{0}) {}

    Tensor(std::vector<int> dims, std::vector<T> vals)
        : shape(std::move(dims)), values(std::move(vals)) {
        if (values.size() != checked_size(shape)) {
            throw ShapeError("tensor: " + std::to_string(values.size()) +
                             " values do not fill shape " + shape_string(shape));
        }
    }

    std::size_t size() const { return values.size(); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool has_grad() const { return !grad.empty(); }
    void alloc_grad() { grad.assign(values.size(), T{0}); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T{0}); }

    /// 3-d accessor (channel, row, col); bounds are the caller's problem.
    T& at(int c, int y, int x) {
        return values[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    const T& at(int c, int y, int x) const {
        return values[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    /// 4-d accessor (out channel, in channel, row, col).
    T& at(int o, int c, int y, int x) {
        return values[((static_cast<std::size_t>(o) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    const T& at(int o, int c, int y, int x) const {
        return values[((static_cast<std::size_t>(o) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }

    static std::string shape_string(const std::vector<int>& dims) {
        std::ostringstream out;
        out << '(';
        for (std::size_t i = 0; i < dims.size(); ++i) {
            if (i) out << 'x';
            out << dims[i];
        }
        out << ')';
        return out.str();
    }

    static std::size_t checked_size(const std::vector<int>& dims) {
        if (dims.empty()) throw ShapeError("tensor: empty shape");
        std::size_t n = 1;
        for (int d : dims) {
            if (d <= 0) throw ShapeError("tensor: non-positive dimension in " + shape_string(dims));
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }
};

template <typename T>
bool same_shape(const Tensor<T>& a, const Tensor<T>& b) {
    return a.shape == b.shape;
}

}  // namespace wbc::nn
