#include <algorithm>
#include <cmath>

#include "ops_common.hpp"
#include "rlms/ops.hpp"
#include "rlms/simd.hpp"

namespace rlms {

template <typename T>
ChannelStats<T> channel_stats(const Tensor<T>& input) {
    detail::require_rank(input.shape(), 4, "channel_stats");
    const std::size_t n = input.size(0);
    const std::size_t c = input.size(1);
    const std::size_t hw = input.size(2) * input.size(3);
    if (hw == 0) throw DimensionError("channel_stats needs H*W >= 1");
    Tensor<T> mean_t(Shape{n, c});
    Tensor<T> std_t(Shape{n, c});
    for (std::size_t p = 0; p < n * c; ++p) {
        const T* x = input.ptr() + p * hw;
        double s = 0.0;
        for (std::size_t i = 0; i < hw; ++i) s += x[i];
        const double mu = s / static_cast<double>(hw);
        double v = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
            const double d = x[i] - mu;
            v += d * d;
        }
        v /= static_cast<double>(hw);
        mean_t.ptr()[p] = static_cast<T>(mu);
        std_t.ptr()[p] = static_cast<T>(std::sqrt(v + kChannelStdEpsilon));
    }
    if (!detail::should_record<T>({&input})) return {mean_t, std_t};

    // d mean / dx = 1/hw; d std / dx = (x - mean) / (hw * std)
    Tape<T>::active()->record(mean_t, [input, n, c, hw](std::span<const T> g) {
        std::span<T> gx = detail::grad_sink(input);
        for (std::size_t p = 0; p < n * c; ++p) {
            const T share = g[p] / static_cast<T>(hw);
            T* dst = gx.data() + p * hw;
            for (std::size_t i = 0; i < hw; ++i) dst[i] += share;
        }
    });
    Tape<T>::active()->record(
        std_t, [input, mean_t, std_impl = std_t.impl_ptr(), n, c, hw](std::span<const T> g) {
            std::span<T> gx = detail::grad_sink(input);
            for (std::size_t p = 0; p < n * c; ++p) {
                const T mu = mean_t.ptr()[p];
                const T k = g[p] / (static_cast<T>(hw) * std_impl->data[p]);
                const T* x = input.ptr() + p * hw;
                T* dst = gx.data() + p * hw;
                for (std::size_t i = 0; i < hw; ++i) dst[i] += k * (x[i] - mu);
            }
        });
    return {mean_t, std_t};
}

template <typename T>
Tensor<T> reduce(ReduceKind kind, const Tensor<T>& input, const std::vector<std::size_t>& axes,
                 bool keepdim) {
    const Shape& in_shape = input.shape();
    const std::size_t nd = in_shape.size();
    std::vector<bool> reduced(nd, axes.empty());
    for (std::size_t a : axes) {
        if (a >= nd) {
            throw DimensionError("reduce axis " + std::to_string(a) + " invalid for shape " +
                                 shape_str(in_shape));
        }
        if (reduced[a]) throw DimensionError("reduce axis " + std::to_string(a) + " repeated");
        reduced[a] = true;
    }
    Shape kept(nd);
    Shape out_shape;
    std::size_t count = 1;
    for (std::size_t d = 0; d < nd; ++d) {
        kept[d] = reduced[d] ? 1 : in_shape[d];
        if (reduced[d]) {
            count *= in_shape[d];
            if (keepdim) out_shape.push_back(1);
        } else {
            out_shape.push_back(in_shape[d]);
        }
    }
    const auto s_in = detail::contiguous_strides(in_shape);
    const auto s_out = detail::broadcast_strides(kept, in_shape);
    std::vector<double> acc(shape_numel(kept), 0.0);
    const T* px = input.ptr();
    detail::broadcast_loop(in_shape, s_in, s_out, [&](std::size_t, std::size_t i, std::size_t o) {
        acc[o] += px[i];
    });
    const double scale = kind == ReduceKind::mean && count > 0 ? 1.0 / static_cast<double>(count) : 1.0;
    Tensor<T> out(out_shape);
    for (std::size_t i = 0; i < acc.size(); ++i) out.ptr()[i] = static_cast<T>(acc[i] * scale);

    if (!detail::should_record<T>({&input})) return out;
    Tape<T>::active()->record(out, [input, s_in, s_out, scale](std::span<const T> g) {
        std::span<T> gx = detail::grad_sink(input);
        const T k = static_cast<T>(scale);
        detail::broadcast_loop(input.shape(), s_in, s_out, [&](std::size_t, std::size_t i, std::size_t o) {
            gx[i] += g[o] * k;
        });
    });
    return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape) {
    if (shape_numel(shape) != input.numel()) {
        throw DimensionError("cannot reshape " + shape_str(input.shape()) + " to " + shape_str(shape));
    }
    Tensor<T> out(std::move(shape), std::vector<T>(input.data().begin(), input.data().end()));
    if (!detail::should_record<T>({&input})) return out;
    Tape<T>::active()->record(out, [input](std::span<const T> g) {
        simd::axpy(g.size(), T(1), g.data(), detail::grad_sink(input).data());
    });
    return out;
}

namespace {

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
    for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
    return s;
}

}  // namespace

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& inputs, std::size_t axis) {
    if (inputs.empty()) throw ContractError("concat of zero tensors");
    const Shape& first = inputs.front().shape();
    if (axis >= first.size()) throw DimensionError("concat axis out of range");
    Shape out_shape = first;
    out_shape[axis] = 0;
    for (const auto& t : inputs) {
        const Shape& s = t.shape();
        bool ok = s.size() == first.size();
        for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
        if (!ok) {
            throw DimensionError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
        }
        out_shape[axis] += s[axis];
    }
    Tensor<T> out(out_shape);
    const AxisSplit split = split_at(out_shape, axis);
    const std::size_t out_block = out_shape[axis] * split.inner;
    std::size_t offset = 0;
    for (const auto& t : inputs) {
        const std::size_t block = t.shape()[axis] * split.inner;
        for (std::size_t o = 0; o < split.outer; ++o) {
            std::copy_n(t.ptr() + o * block, block, out.ptr() + o * out_block + offset);
        }
        offset += block;
    }

    bool any = false;
    for (const auto& t : inputs) any = any || detail::should_record<T>({&t});
    if (!any) return out;
    Tape<T>::active()->record(out, [inputs, axis, split, out_block](std::span<const T> g) {
        std::size_t offset = 0;
        for (const auto& t : inputs) {
            const std::size_t block = t.shape()[axis] * split.inner;
            if (t.requires_grad()) {
                std::span<T> gt = detail::grad_sink(t);
                for (std::size_t o = 0; o < split.outer; ++o) {
                    simd::axpy(block, T(1), g.data() + o * out_block + offset, gt.data() + o * block);
                }
            }
            offset += block;
        }
    });
    return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& input, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& shape = input.shape();
    if (axis >= shape.size()) throw DimensionError("slice axis out of range");
    if (begin >= end || end > shape[axis]) {
        throw DimensionError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") invalid for axis of size " + std::to_string(shape[axis]));
    }
    Shape out_shape = shape;
    out_shape[axis] = end - begin;
    const AxisSplit split = split_at(shape, axis);
    const std::size_t in_block = shape[axis] * split.inner;
    const std::size_t out_block = (end - begin) * split.inner;
    const std::size_t offset = begin * split.inner;
    Tensor<T> out(out_shape);
    for (std::size_t o = 0; o < split.outer; ++o) {
        std::copy_n(input.ptr() + o * in_block + offset, out_block, out.ptr() + o * out_block);
    }
    if (!detail::should_record<T>({&input})) return out;
    Tape<T>::active()->record(out, [input, split, in_block, out_block, offset](std::span<const T> g) {
        std::span<T> gx = detail::grad_sink(input);
        for (std::size_t o = 0; o < split.outer; ++o) {
            simd::axpy(out_block, T(1), g.data() + o * out_block, gx.data() + o * in_block + offset);
        }
    });
    return out;
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank(a.shape(), 2, "matmul");
    detail::require_rank(b.shape(), 2, "matmul");
    const std::size_t m = a.size(0);
    const std::size_t k = a.size(1);
    const std::size_t n = b.size(1);
    if (b.size(0) != k) {
        throw DimensionError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    Tensor<T> out(Shape{m, n});
    simd::gemm(false, false, m, n, k, T(1), a.ptr(), k, b.ptr(), n, T(0), out.ptr(), n);
    if (!detail::should_record<T>({&a, &b})) return out;
    Tape<T>::active()->record(out, [a, b, m, n, k](std::span<const T> g) {
        if (a.requires_grad()) {
            simd::gemm(false, true, m, k, n, T(1), g.data(), n, b.ptr(), n, T(1),
                       detail::grad_sink(a).data(), k);
        }
        if (b.requires_grad()) {
            simd::gemm(true, false, k, n, m, T(1), a.ptr(), k, g.data(), n, T(1),
                       detail::grad_sink(b).data(), n);
        }
    });
    return out;
}

#define RLMS_INSTANTIATE(T)                                                                       \
    template ChannelStats<T> channel_stats<T>(const Tensor<T>&);                                 \
    template Tensor<T> reduce<T>(ReduceKind, const Tensor<T>&, const std::vector<std::size_t>&,  \
                                 bool);                                                          \
    template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                                      \
    template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);                    \
    template Tensor<T> slice<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t);        \
    template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);

RLMS_INSTANTIATE(float)
RLMS_INSTANTIATE(double)
#undef RLMS_INSTANTIATE

}  // namespace rlms
