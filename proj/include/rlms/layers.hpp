#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rlms/ops.hpp"
#include "rlms/rng.hpp"

namespace rlms {

template <typename T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

// Ordered handles onto a network's parameters. Handles share storage with the
// network, so writing through them updates the network in place.
template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
struct Conv2d {
    Tensor<T> weight;  // [F, C, k, k]
    Tensor<T> bias;    // [F]
    std::size_t stride = 1;
    std::size_t padding = 0;

    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, &bias, stride, padding); }
    std::size_t in_channels() const { return weight.size(1); }
    std::size_t out_channels() const { return weight.size(0); }
    void collect(const std::string& prefix, ParamList<T>& out) const;

    template <typename U>
    Conv2d<U> cast() const {
        return {weight.template cast<U>(), bias.template cast<U>(), stride, padding};
    }
};

// He-normal weights scaled by `gain`, zero bias, "same" padding for odd k.
template <typename T>
Conv2d<T> make_conv(Rng& rng, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                    double gain = 1.0);

template <typename T>
struct Linear {
    Tensor<T> weight;  // [in, out]
    Tensor<T> bias;    // [out]

    // x: [N, in] -> [N, out]
    Tensor<T> operator()(const Tensor<T>& x) const;
    void collect(const std::string& prefix, ParamList<T>& out) const;

    template <typename U>
    Linear<U> cast() const {
        return {weight.template cast<U>(), bias.template cast<U>()};
    }
};

template <typename T>
Linear<T> make_linear(Rng& rng, std::size_t in, std::size_t out, double gain = 1.0);

struct ParamCount {
    std::size_t count = 0;
    std::size_t bytes = 0;  // stored as 32-bit floats
};

template <typename T>
ParamCount count_params(const ParamList<T>& params);

// target := omega * source + (1 - omega) * target, elementwise over matching lists.
template <typename T>
void ema_update(const ParamList<T>& source, const ParamList<T>& target, double omega);

// Bitwise copy of values between structurally identical lists.
template <typename T>
void copy_params(const ParamList<T>& source, const ParamList<T>& target);

template <typename T>
void set_requires_grad(const ParamList<T>& params, bool flag);

template <typename T>
void clear_grads(const ParamList<T>& params);

// Per-channel affine modulation after instance normalization:
// (x - mu(x)) / sigma(x) * scale + shift, with scale/shift given as [N, C].
template <typename T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift);

}  // namespace rlms
