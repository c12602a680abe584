#include <algorithm>
#include <cmath>
#include <limits>

#include "ops_common.hpp"
#include "rlms/ops.hpp"
#include "rlms/simd.hpp"

namespace rlms {

bool is_binary(ElementwiseKind kind) {
    switch (kind) {
        case ElementwiseKind::add:
        case ElementwiseKind::sub:
        case ElementwiseKind::mul:
        case ElementwiseKind::div:
            return true;
        default:
            return false;
    }
}

const char* elementwise_name(ElementwiseKind kind) {
    switch (kind) {
        case ElementwiseKind::add: return "add";
        case ElementwiseKind::sub: return "sub";
        case ElementwiseKind::mul: return "mul";
        case ElementwiseKind::div: return "div";
        case ElementwiseKind::relu: return "relu";
        case ElementwiseKind::tanh: return "tanh";
        case ElementwiseKind::exp: return "exp";
        case ElementwiseKind::log: return "log";
        case ElementwiseKind::softplus: return "softplus";
        case ElementwiseKind::square: return "square";
        case ElementwiseKind::sqrt: return "sqrt";
        case ElementwiseKind::negate: return "negate";
        case ElementwiseKind::sigmoid: return "sigmoid";
    }
    return "unknown";
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t nd = std::max(a.size(), b.size());
    Shape out(nd, 1);
    for (std::size_t i = 0; i < nd; ++i) {
        const std::size_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
        const std::size_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw DimensionError("shapes " + shape_str(a) + " and " + shape_str(b) +
                                 " do not broadcast");
        }
        out[i] = std::max(da, db);
    }
    return out;
}

namespace {

template <typename T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T softplus_scalar(T x) {
    return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
Tensor<T> binary(ElementwiseKind kind, const Tensor<T>& a, const Tensor<T>& b) {
    const Shape out_shape = broadcast_shape(a.shape(), b.shape());
    Tensor<T> out(out_shape);
    const auto sa = detail::broadcast_strides(a.shape(), out_shape);
    const auto sb = detail::broadcast_strides(b.shape(), out_shape);
    const T* pa = a.ptr();
    const T* pb = b.ptr();
    T* po = out.ptr();
    const bool same = a.shape() == b.shape();

    auto run = [&](auto op) {
        if (same) {
            const std::size_t n = out.numel();
            for (std::size_t i = 0; i < n; ++i) po[i] = op(pa[i], pb[i]);
        } else {
            detail::broadcast_loop(out_shape, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
                po[o] = op(pa[ia], pb[ib]);
            });
        }
    };
    switch (kind) {
        case ElementwiseKind::add: run([](T x, T y) { return x + y; }); break;
        case ElementwiseKind::sub: run([](T x, T y) { return x - y; }); break;
        case ElementwiseKind::mul: run([](T x, T y) { return x * y; }); break;
        case ElementwiseKind::div: run([](T x, T y) { return x / y; }); break;
        default: throw ContractError("not a binary op");
    }

    if (!detail::should_record<T>({&a, &b})) return out;
    Tape<T>::active()->record(out, [a, b, kind, sa, sb, out_shape, same](std::span<const T> g) {
        const bool need_a = a.requires_grad();
        const bool need_b = b.requires_grad();
        std::span<T> ga = need_a ? detail::grad_sink(a) : std::span<T>{};
        std::span<T> gb = need_b ? detail::grad_sink(b) : std::span<T>{};
        const T* pa = a.ptr();
        const T* pb = b.ptr();
        auto visit = [&](auto fn) {
            if (same) {
                for (std::size_t i = 0; i < g.size(); ++i) fn(i, i, i);
            } else {
                detail::broadcast_loop(out_shape, sa, sb, fn);
            }
        };
        switch (kind) {
            case ElementwiseKind::add:
                if (same) {
                    if (need_a) simd::axpy(g.size(), T(1), g.data(), ga.data());
                    if (need_b) simd::axpy(g.size(), T(1), g.data(), gb.data());
                    break;
                }
                visit([&](std::size_t o, std::size_t ia, std::size_t ib) {
                    if (need_a) ga[ia] += g[o];
                    if (need_b) gb[ib] += g[o];
                });
                break;
            case ElementwiseKind::sub:
                if (same) {
                    if (need_a) simd::axpy(g.size(), T(1), g.data(), ga.data());
                    if (need_b) simd::axpy(g.size(), T(-1), g.data(), gb.data());
                    break;
                }
                visit([&](std::size_t o, std::size_t ia, std::size_t ib) {
                    if (need_a) ga[ia] += g[o];
                    if (need_b) gb[ib] -= g[o];
                });
                break;
            case ElementwiseKind::mul:
                visit([&](std::size_t o, std::size_t ia, std::size_t ib) {
                    if (need_a) ga[ia] += g[o] * pb[ib];
                    if (need_b) gb[ib] += g[o] * pa[ia];
                });
                break;
            case ElementwiseKind::div:
                visit([&](std::size_t o, std::size_t ia, std::size_t ib) {
                    if (need_a) ga[ia] += g[o] / pb[ib];
                    if (need_b) gb[ib] -= g[o] * pa[ia] / (pb[ib] * pb[ib]);
                });
                break;
            default:
                break;
        }
    });
    return out;
}

template <typename T>
Tensor<T> unary(ElementwiseKind kind, const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    const T* px = x.ptr();
    T* po = out.ptr();
    const std::size_t n = x.numel();
    switch (kind) {
        case ElementwiseKind::relu:
            for (std::size_t i = 0; i < n; ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
            break;
        case ElementwiseKind::tanh:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
            break;
        case ElementwiseKind::exp:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::exp(px[i]);
            break;
        case ElementwiseKind::log:
            for (std::size_t i = 0; i < n; ++i) {
                if (px[i] < T(0)) throw DomainError("log of negative value");
                po[i] = std::log(px[i]);
            }
            break;
        case ElementwiseKind::softplus:
            for (std::size_t i = 0; i < n; ++i) po[i] = softplus_scalar(px[i]);
            break;
        case ElementwiseKind::square:
            for (std::size_t i = 0; i < n; ++i) po[i] = px[i] * px[i];
            break;
        case ElementwiseKind::sqrt:
            for (std::size_t i = 0; i < n; ++i) {
                if (px[i] < T(0)) throw DomainError("sqrt of negative value");
                po[i] = std::sqrt(px[i]);
            }
            break;
        case ElementwiseKind::negate:
            for (std::size_t i = 0; i < n; ++i) po[i] = -px[i];
            break;
        case ElementwiseKind::sigmoid:
            for (std::size_t i = 0; i < n; ++i) po[i] = sigmoid_scalar(px[i]);
            break;
        default:
            throw ContractError("not a unary op");
    }

    if (!detail::should_record<T>({&x})) return out;
    Tape<T>::active()->record(out, [x, out_impl = out.impl_ptr(), kind](std::span<const T> g) {
        if (!x.requires_grad()) return;
        std::span<T> gx = detail::grad_sink(x);
        const T* px = x.ptr();
        const T* py = out_impl->data.data();
        const std::size_t n = g.size();
        switch (kind) {
            case ElementwiseKind::relu:
                for (std::size_t i = 0; i < n; ++i) gx[i] += px[i] > T(0) ? g[i] : T(0);
                break;
            case ElementwiseKind::tanh:
                for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (T(1) - py[i] * py[i]);
                break;
            case ElementwiseKind::exp:
                for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * py[i];
                break;
            case ElementwiseKind::log:
                for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] / px[i];
                break;
            case ElementwiseKind::softplus:
                for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * sigmoid_scalar(px[i]);
                break;
            case ElementwiseKind::square:
                for (std::size_t i = 0; i < n; ++i) gx[i] += T(2) * px[i] * g[i];
                break;
            case ElementwiseKind::sqrt:
                for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] / (T(2) * py[i]);
                break;
            case ElementwiseKind::negate:
                for (std::size_t i = 0; i < n; ++i) gx[i] -= g[i];
                break;
            case ElementwiseKind::sigmoid:
                for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * py[i] * (T(1) - py[i]);
                break;
            default:
                break;
        }
    });
    return out;
}

}  // namespace

template <typename T>
Tensor<T> elementwise(ElementwiseKind kind, const Tensor<T>& a, const Tensor<T>* b) {
    if (is_binary(kind)) {
        if (b == nullptr) {
            throw ContractError(std::string(elementwise_name(kind)) + " needs two operands");
        }
        return binary(kind, a, *b);
    }
    return unary(kind, a);
}

template <typename T>
Tensor<T> affine_scalar(const Tensor<T>& x, T scale, T shift) {
    Tensor<T> out(x.shape());
    const T* px = x.ptr();
    T* po = out.ptr();
    for (std::size_t i = 0; i < x.numel(); ++i) po[i] = px[i] * scale + shift;
    if (!detail::should_record<T>({&x})) return out;
    Tape<T>::active()->record(out, [x, scale](std::span<const T> g) {
        if (!x.requires_grad()) return;
        simd::axpy(g.size(), scale, g.data(), detail::grad_sink(x).data());
    });
    return out;
}

template <typename T>
Tensor<T> squash(const Tensor<T>& x) {
    const T bound = T(1) - std::numeric_limits<T>::epsilon();
    Tensor<T> out(x.shape());
    const T* px = x.ptr();
    T* po = out.ptr();
    for (std::size_t i = 0; i < x.numel(); ++i) po[i] = std::clamp(std::tanh(px[i]), -bound, bound);
    if (!detail::should_record<T>({&x})) return out;
    Tape<T>::active()->record(out, [x, out_impl = out.impl_ptr()](std::span<const T> g) {
        if (!x.requires_grad()) return;
        std::span<T> gx = detail::grad_sink(x);
        const T* py = out_impl->data.data();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T(1) - py[i] * py[i]);
    });
    return out;
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
    if (lo > hi) throw ParameterError("clamp bounds are inverted");
    Tensor<T> out(x.shape());
    const T* px = x.ptr();
    T* po = out.ptr();
    for (std::size_t i = 0; i < x.numel(); ++i) po[i] = std::clamp(px[i], lo, hi);
    if (!detail::should_record<T>({&x})) return out;
    Tape<T>::active()->record(out, [x, lo, hi](std::span<const T> g) {
        if (!x.requires_grad()) return;
        std::span<T> gx = detail::grad_sink(x);
        const T* px = x.ptr();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (px[i] >= lo && px[i] <= hi) gx[i] += g[i];
        }
    });
    return out;
}

#define RLMS_INSTANTIATE(T)                                                                  \
    template Tensor<T> elementwise<T>(ElementwiseKind, const Tensor<T>&, const Tensor<T>*); \
    template Tensor<T> affine_scalar<T>(const Tensor<T>&, T, T);                            \
    template Tensor<T> squash<T>(const Tensor<T>&);                                         \
    template Tensor<T> clamp<T>(const Tensor<T>&, T, T);

RLMS_INSTANTIATE(float)
RLMS_INSTANTIATE(double)
#undef RLMS_INSTANTIATE

}  // namespace rlms
