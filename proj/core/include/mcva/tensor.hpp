#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mcva/errors.hpp"

namespace mcva {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major tensor. Values are immutable once an operation has
// produced them; gradients live on the tape, not here.
template <class S>
struct Tensor {
    Shape shape;
    std::vector<S> data;
    bool requires_grad = false;
    std::string name; // non-empty for named parameters

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }
    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }
};

template <class S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

template <class S>
TensorPtr<S> make_tensor(Shape shape, bool requires_grad = false) {
    auto t = std::make_shared<Tensor<S>>();
    const std::int64_t n = shape_numel(shape);
    if (n < 0) throw ShapeError("tensor shape has negative extent " + shape_str(shape));
    t->shape = std::move(shape);
    t->data.assign(static_cast<std::size_t>(n), S(0));
    t->requires_grad = requires_grad;
    return t;
}

template <class S>
TensorPtr<S> make_tensor(Shape shape, std::vector<S> data, bool requires_grad = false) {
    auto t = std::make_shared<Tensor<S>>();
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    return t;
}

template <class S>
TensorPtr<S> make_scalar(S v) {
    return make_tensor<S>({1}, std::vector<S>{v});
}

template <class S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
    return a.shape == b.shape;
}

} // namespace mcva
