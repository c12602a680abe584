#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rlms/tensor.hpp"

// Differentiable tensor operations. Every op materializes its output; when a
// tape is active and an input requires grad, the op records its backward rule.

namespace rlms {

enum class ElementwiseKind {
    add,
    sub,
    mul,
    div,
    relu,
    tanh,
    exp,
    log,
    softplus,
    square,
    sqrt,
    negate,
    sigmoid,
};

bool is_binary(ElementwiseKind kind);
const char* elementwise_name(ElementwiseKind kind);

// Binary kinds broadcast right-aligned; unary kinds ignore `b`.
template <typename T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a, const Tensor<T>* b = nullptr);

Shape broadcast_shape(const Shape& a, const Shape& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(ElementwiseKind::add, a, &b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(ElementwiseKind::sub, a, &b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(ElementwiseKind::mul, a, &b);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return elementwise(ElementwiseKind::div, a, &b);
}
template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::relu, x);
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::tanh, x);
}
template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::exp, x);
}
template <typename T>
Tensor<T> log(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::log, x);
}
template <typename T>
Tensor<T> softplus(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::softplus, x);
}
template <typename T>
Tensor<T> square(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::square, x);
}
template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::sqrt, x);
}
template <typename T>
Tensor<T> negate(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::negate, x);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    return elementwise(ElementwiseKind::sigmoid, x);
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
    return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
    return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
    return mul(a, b);
}
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) {
    return div(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a) {
    return negate(a);
}

// x * scale + shift with a compile-time-free scalar pair.
template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, T scale, T shift);

template <typename T>
Tensor<T> operator*(const Tensor<T>& a, T s) {
    return affine_scalar(a, s, T(0));
}
template <typename T>
Tensor<T> operator*(T s, const Tensor<T>& a) {
    return affine_scalar(a, s, T(0));
}
template <typename T>
Tensor<T> operator+(const Tensor<T>& a, T s) {
    return affine_scalar(a, T(1), s);
}

// tanh bounded strictly inside (-1, 1) at the element type's precision;
// gradient is 1 - y^2 of the bounded output.
template <typename T>
Tensor<T> squash(const Tensor<T>& x);

// Gradient passes where lo <= x <= hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

// input [N,C,H,W], weight [F,C,kh,kw], bias [F] (optional), zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 std::size_t stride, std::size_t padding);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::nullptr_t, std::size_t stride,
                 std::size_t padding) {
    return conv2d<T>(input, weight, static_cast<const Tensor<T>*>(nullptr), stride, padding);
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, std::size_t factor);

// k x k windows with stride k; H and W must be divisible by k.
template <typename T>
Tensor<T> avg_pool(const Tensor<T>& input, std::size_t k);

inline constexpr double kChannelStdEpsilon = 1e-5;

template <typename T>
struct ChannelStats {
    Tensor<T> mean;  // [N,C]
    Tensor<T> std;   // [N,C], sqrt(var + 1e-5)
};

template <typename T>
ChannelStats<T> channel_stats(const Tensor<T>& input);

enum class ReduceKind { sum, mean };

template <typename T>
Tensor<T> reduce(ReduceKind kind, const Tensor<T>& input, const std::vector<std::size_t>& axes,
                 bool keepdim = false);

// Over every element; result has shape [].
template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
    return reduce(ReduceKind::sum, input, {}, false);
}
template <typename T>
Tensor<T> mean(const Tensor<T>& input) {
    return reduce(ReduceKind::mean, input, {}, false);
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& inputs, std::size_t axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& input, std::size_t axis, std::size_t begin, std::size_t end);

// [M,K] x [K,N]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace rlms
