#include <algorithm>
#include <atomic>
#include <type_traits>
#include <vector>

#include "ops_common.hpp"
#include "rlms/fault_injection.hpp"
#include "rlms/ops.hpp"
#include "rlms/simd.hpp"

namespace rlms {

namespace fault_injection {
namespace {
std::atomic<bool> g_corrupt_conv_backward{false};
}
void corrupt_conv2d_backward(bool enabled) {
    g_corrupt_conv_backward.store(enabled);
}
bool conv2d_backward_corrupted() {
    return g_corrupt_conv_backward.load();
}
}  // namespace fault_injection

namespace {

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t f, kh, kw;
    std::size_t stride, pad;
    std::size_t ho, wo;

    std::size_t patch() const { return c * kh * kw; }
    std::size_t pixels() const { return ho * wo; }
    bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Range of output columns whose input column ix = ox*stride + kx - pad lies inside [0, w).
inline void valid_columns(const ConvGeometry& g, std::size_t kx, std::size_t& lo, std::size_t& hi) {
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
    std::ptrdiff_t first = 0;
    if (off < 0) first = (-off + s - 1) / s;
    std::ptrdiff_t last = (static_cast<std::ptrdiff_t>(g.w) - 1 - off);
    last = last < 0 ? -1 : last / s;
    lo = static_cast<std::size_t>(std::min<std::ptrdiff_t>(first, static_cast<std::ptrdiff_t>(g.wo)));
    hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(last + 1, static_cast<std::ptrdiff_t>(lo),
                                                             static_cast<std::ptrdiff_t>(g.wo)));
}

// Writes one sample's patches into columns [0, pixels) of a row-major matrix with row stride `ld`.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col, std::size_t ld) {
    for (std::size_t c = 0; c < g.c; ++c) {
        const T* plane = in + c * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                T* row = col + ((c * g.kh + ky) * g.kw + kx) * ld;
                std::size_t lo = 0, hi = 0;
                valid_columns(g, kx, lo, hi);
                const std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    T* dst = row + oy * g.wo;
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(dst, dst + g.wo, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * g.w;
                    std::fill(dst, dst + lo, T(0));
                    if (g.stride == 1) {
                        std::copy(src + (static_cast<std::ptrdiff_t>(lo) + xoff), src + (static_cast<std::ptrdiff_t>(hi) + xoff),
                                  dst + lo);
                    } else {
                        for (std::size_t ox = lo; ox < hi; ++ox) {
                            dst[ox] = src[static_cast<std::ptrdiff_t>(ox * g.stride) + xoff];
                        }
                    }
                    std::fill(dst + hi, dst + g.wo, T(0));
                }
            }
        }
    }
}

template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* in_grad, std::size_t ld) {
    for (std::size_t c = 0; c < g.c; ++c) {
        T* plane = in_grad + c * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const T* row = col + ((c * g.kh + ky) * g.kw + kx) * ld;
                std::size_t lo = 0, hi = 0;
                valid_columns(g, kx, lo, hi);
                const std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
                for (std::size_t oy = 0; oy < g.ho; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * g.w;
                    const T* src = row + oy * g.wo;
                    for (std::size_t ox = lo; ox < hi; ++ox) {
                        dst[static_cast<std::ptrdiff_t>(ox * g.stride) + xoff] += src[ox];
                    }
                }
            }
        }
    }
}

// Per patch row (c, ky, kx): offset of the tap inside one sample and its displacement.
struct PatchRow {
    std::size_t offset;
    std::ptrdiff_t dy, dx;
    std::size_t lo, hi;
};

struct ConvPanels {
    const float* input;
    ConvGeometry g;
    std::vector<PatchRow> rows;
};

ConvPanels conv_panels(const float* input, const ConvGeometry& g) {
    ConvPanels cp{input, g, {}};
    cp.rows.reserve(g.patch());
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                PatchRow r{};
                r.dy = static_cast<std::ptrdiff_t>(ky) - static_cast<std::ptrdiff_t>(g.pad);
                r.dx = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
                r.offset = c * g.h * g.w;
                valid_columns(g, kx, r.lo, r.hi);
                cp.rows.push_back(r);
            }
        }
    }
    return cp;
}

// op(B) = column matrix [patch, N*pixels]: rows are patch taps, columns output pixels.
void pack_columns(const void* ctx, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc, std::size_t nr,
                  float* dst) {
    const ConvPanels& cp = *static_cast<const ConvPanels*>(ctx);
    const ConvGeometry& g = cp.g;
    const std::size_t pixels = g.pixels();
    const std::size_t in_size = g.c * g.h * g.w;
    const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(g.stride);
    for (std::size_t q = 0; q * nr < nc; ++q) {
        float* panel = dst + q * kc * nr;
        const std::size_t width = std::min(nr, nc - q * nr);
        std::size_t j = j0 + q * nr;
        for (std::size_t done = 0; done < width;) {
            const std::size_t n = j / pixels;
            const std::size_t oy = (j % pixels) / g.wo;
            const std::size_t ox = j % g.wo;
            const std::size_t len = std::min(width - done, g.wo - ox);
            const float* sample = cp.input + n * in_size;
            for (std::size_t p = 0; p < kc; ++p) {
                const PatchRow& r = cp.rows[p0 + p];
                float* out = panel + p * nr + done;
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * s + r.dy;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                    std::fill(out, out + len, 0.0f);
                    continue;
                }
                const float* src = sample + r.offset + static_cast<std::size_t>(iy) * g.w;
                const std::size_t a = std::clamp(r.lo, ox, ox + len);
                const std::size_t b = std::clamp(r.hi, a, ox + len);
                std::fill(out, out + (a - ox), 0.0f);
                if (s == 1) {
                    std::copy(src + (static_cast<std::ptrdiff_t>(a) + r.dx), src + (static_cast<std::ptrdiff_t>(b) + r.dx),
                              out + (a - ox));
                } else {
                    for (std::size_t x = a; x < b; ++x) out[x - ox] = src[static_cast<std::ptrdiff_t>(x) * s + r.dx];
                }
                std::fill(out + (b - ox), out + len, 0.0f);
            }
            done += len;
            j += len;
        }
        if (width < nr) {
            for (std::size_t p = 0; p < kc; ++p) std::fill(panel + p * nr + width, panel + (p + 1) * nr, 0.0f);
        }
    }
}

// op(B) = transposed column matrix [N*pixels, patch], as needed by the weight gradient.
void pack_columns_t(const void* ctx, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc, std::size_t nr,
                    float* dst) {
    const ConvPanels& cp = *static_cast<const ConvPanels*>(ctx);
    const ConvGeometry& g = cp.g;
    const std::size_t pixels = g.pixels();
    const std::size_t in_size = g.c * g.h * g.w;
    const std::ptrdiff_t h = static_cast<std::ptrdiff_t>(g.h);
    const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(g.w);
    const std::ptrdiff_t reach = static_cast<std::ptrdiff_t>(g.kh > g.kw ? g.kh : g.kw);
    for (std::size_t p = 0; p < kc; ++p) {
        const std::size_t j = p0 + p;
        const std::size_t n = j / pixels;
        const std::ptrdiff_t iy0 = static_cast<std::ptrdiff_t>(((j % pixels) / g.wo) * g.stride);
        const std::ptrdiff_t ix0 = static_cast<std::ptrdiff_t>((j % g.wo) * g.stride);
        const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.pad);
        const bool interior = iy0 >= pad && ix0 >= pad && iy0 - pad + reach <= h && ix0 - pad + reach <= w;
        const float* sample = cp.input + n * in_size;
        for (std::size_t q = 0; q * nr < nc; ++q) {
            float* out = dst + q * kc * nr + p * nr;
            const std::size_t width = std::min(nr, nc - q * nr);
            const PatchRow* rows = cp.rows.data() + j0 + q * nr;
            if (interior) {
                const float* base = sample + (iy0 * w + ix0);
                for (std::size_t jj = 0; jj < width; ++jj) {
                    out[jj] = base[static_cast<std::ptrdiff_t>(rows[jj].offset) + rows[jj].dy * w + rows[jj].dx];
                }
            } else {
                for (std::size_t jj = 0; jj < width; ++jj) {
                    const std::ptrdiff_t iy = iy0 + rows[jj].dy;
                    const std::ptrdiff_t ix = ix0 + rows[jj].dx;
                    out[jj] = (iy < 0 || iy >= h || ix < 0 || ix >= w)
                                  ? 0.0f
                                  : sample[static_cast<std::ptrdiff_t>(rows[jj].offset) + iy * w + ix];
                }
            }
            std::fill(out + width, out + nr, 0.0f);
        }
    }
}

template <typename T, int Slot>
std::vector<T>& scratch() {
    thread_local std::vector<T> buf;
    return buf;
}

}  // namespace

// Non-pointwise convolutions lower the whole batch to one [patch, N*pixels]
// column matrix so each direction is a single GEMM.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 std::size_t stride, std::size_t padding) {
    detail::require_rank(input.shape(), 4, "conv2d input");
    detail::require_rank(weight.shape(), 4, "conv2d weight");
    if (stride < 1) throw ParameterError("conv2d stride must be >= 1");
    ConvGeometry g{};
    g.n = input.size(0);
    g.c = input.size(1);
    g.h = input.size(2);
    g.w = input.size(3);
    g.f = weight.size(0);
    g.kh = weight.size(2);
    g.kw = weight.size(3);
    g.stride = stride;
    g.pad = padding;
    if (weight.size(1) != g.c) {
        throw DimensionError("conv2d channel mismatch: input " + shape_str(input.shape()) +
                             ", weight " + shape_str(weight.shape()));
    }
    if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) {
        throw DimensionError("conv2d kernel larger than padded input");
    }
    if (bias != nullptr && (bias->dim() != 1 || bias->size(0) != g.f)) {
        throw DimensionError("conv2d bias must have shape [" + std::to_string(g.f) + "]");
    }
    g.ho = (g.h + 2 * padding - g.kh) / stride + 1;
    g.wo = (g.w + 2 * padding - g.kw) / stride + 1;

    Tensor<T> out(Shape{g.n, g.f, g.ho, g.wo});
    const std::size_t patch = g.patch();
    const std::size_t pixels = g.pixels();
    const std::size_t in_size = g.c * g.h * g.w;

    if (g.pointwise()) {
        for (std::size_t n = 0; n < g.n; ++n) {
            simd::gemm(false, false, g.f, pixels, patch, T(1), weight.ptr(), patch, input.ptr() + n * in_size,
                       pixels, T(0), out.ptr() + n * g.f * pixels, pixels);
        }
    } else {
        const std::size_t ld = g.n * pixels;
        std::vector<T>& tmp = scratch<T, 1>();
        tmp.resize(g.f * ld);
        if constexpr (std::is_same_v<T, float>) {
            const ConvPanels cp = conv_panels(input.ptr(), g);
            simd::gemm_panels(false, g.f, ld, patch, 1.0f, weight.ptr(), patch, {&pack_columns, &cp}, 0.0f,
                              tmp.data(), ld);
        } else {
            std::vector<T>& col = scratch<T, 0>();
            col.resize(patch * ld);
            for (std::size_t n = 0; n < g.n; ++n) im2col(input.ptr() + n * in_size, g, col.data() + n * pixels, ld);
            simd::gemm(false, false, g.f, ld, patch, T(1), weight.ptr(), patch, col.data(), ld, T(0), tmp.data(),
                       ld);
        }
        for (std::size_t n = 0; n < g.n; ++n) {
            for (std::size_t f = 0; f < g.f; ++f) {
                const T* src = tmp.data() + f * ld + n * pixels;
                std::copy(src, src + pixels, out.ptr() + (n * g.f + f) * pixels);
            }
        }
    }
    if (bias != nullptr) {
        for (std::size_t n = 0; n < g.n; ++n) {
            for (std::size_t f = 0; f < g.f; ++f) {
                const T b = bias->ptr()[f];
                T* row = out.ptr() + (n * g.f + f) * pixels;
                for (std::size_t p = 0; p < pixels; ++p) row[p] += b;
            }
        }
    }

    const Tensor<T> bias_t = bias != nullptr ? *bias : Tensor<T>();
    if (!detail::should_record<T>({&input, &weight, bias})) return out;
    Tape<T>::active()->record(out, [input, weight, bias_t, g](std::span<const T> grad) {
        const bool need_x = input.requires_grad();
        const bool need_w = weight.requires_grad();
        const bool need_b = bias_t.numel() > 0 && bias_t.requires_grad();
        const std::size_t patch = g.patch();
        const std::size_t pixels = g.pixels();
        const std::size_t in_size = g.c * g.h * g.w;
        const T w_scale = fault_injection::conv2d_backward_corrupted() ? T(1.5) : T(1);

        if (need_b) {
            std::span<T> gb = detail::grad_sink(bias_t);
            for (std::size_t n = 0; n < g.n; ++n) {
                for (std::size_t f = 0; f < g.f; ++f) {
                    const T* row = grad.data() + (n * g.f + f) * pixels;
                    T acc = T(0);
                    for (std::size_t p = 0; p < pixels; ++p) acc += row[p];
                    gb[f] += acc;
                }
            }
        }
        if (!need_w && !need_x) return;

        if (g.pointwise()) {
            std::span<T> gw = need_w ? detail::grad_sink(weight) : std::span<T>{};
            std::span<T> gx = need_x ? detail::grad_sink(input) : std::span<T>{};
            for (std::size_t n = 0; n < g.n; ++n) {
                const T* g_n = grad.data() + n * g.f * pixels;
                if (need_w) {
                    simd::gemm(false, true, g.f, patch, pixels, w_scale, g_n, pixels, input.ptr() + n * in_size,
                               pixels, T(1), gw.data(), patch);
                }
                if (need_x) {
                    simd::gemm(true, false, patch, pixels, g.f, T(1), weight.ptr(), patch, g_n, pixels, T(1),
                               gx.data() + n * in_size, pixels);
                }
            }
            return;
        }

        // Gradient of the output rearranged to [F, N*pixels] to match the column layout.
        const std::size_t ld = g.n * pixels;
        std::vector<T>& dy = scratch<T, 2>();
        dy.resize(g.f * ld);
        for (std::size_t n = 0; n < g.n; ++n) {
            for (std::size_t f = 0; f < g.f; ++f) {
                const T* src = grad.data() + (n * g.f + f) * pixels;
                std::copy(src, src + pixels, dy.data() + f * ld + n * pixels);
            }
        }
        if (need_w) {
            std::span<T> gw = detail::grad_sink(weight);
            if constexpr (std::is_same_v<T, float>) {
                const ConvPanels cp = conv_panels(input.ptr(), g);
                simd::gemm_panels(false, g.f, patch, ld, w_scale, dy.data(), ld, {&pack_columns_t, &cp}, 1.0f,
                                  gw.data(), patch);
            } else {
                std::vector<T>& col = scratch<T, 0>();
                col.resize(patch * ld);
                for (std::size_t n = 0; n < g.n; ++n) {
                    im2col(input.ptr() + n * in_size, g, col.data() + n * pixels, ld);
                }
                simd::gemm(false, true, g.f, patch, ld, w_scale, dy.data(), ld, col.data(), ld, T(1), gw.data(),
                           patch);
            }
        }
        if (need_x) {
            std::span<T> gx = detail::grad_sink(input);
            std::vector<T>& dcol = scratch<T, 1>();
            dcol.resize(patch * ld);
            simd::gemm(true, false, patch, ld, g.f, T(1), weight.ptr(), patch, dy.data(), ld, T(0), dcol.data(), ld);
            for (std::size_t n = 0; n < g.n; ++n) col2im(dcol.data() + n * pixels, g, gx.data() + n * in_size, ld);
        }
    });
    return out;
}

template <typename T>
Tensor<T> upsample_nearest(const Tensor<T>& input, std::size_t factor) {
    if (factor < 1) throw ParameterError("upsample factor must be >= 1");
    detail::require_rank(input.shape(), 4, "upsample_nearest");
    const std::size_t planes = input.size(0) * input.size(1);
    const std::size_t h = input.size(2);
    const std::size_t w = input.size(3);
    Tensor<T> out(Shape{input.size(0), input.size(1), h * factor, w * factor});
    const std::size_t ow = w * factor;
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = input.ptr() + p * h * w;
        T* dst = out.ptr() + p * h * w * factor * factor;
        for (std::size_t y = 0; y < h * factor; ++y) {
            const T* srow = src + (y / factor) * w;
            T* drow = dst + y * ow;
            for (std::size_t x = 0; x < ow; ++x) drow[x] = srow[x / factor];
        }
    }
    if (!detail::should_record<T>({&input})) return out;
    Tape<T>::active()->record(out, [input, factor, planes, h, w](std::span<const T> g) {
        std::span<T> gx = detail::grad_sink(input);
        const std::size_t ow = w * factor;
        for (std::size_t p = 0; p < planes; ++p) {
            T* dst = gx.data() + p * h * w;
            const T* src = g.data() + p * h * w * factor * factor;
            for (std::size_t y = 0; y < h * factor; ++y) {
                T* drow = dst + (y / factor) * w;
                const T* srow = src + y * ow;
                for (std::size_t x = 0; x < ow; ++x) drow[x / factor] += srow[x];
            }
        }
    });
    return out;
}

template <typename T>
Tensor<T> avg_pool(const Tensor<T>& input, std::size_t k) {
    if (k < 1) throw ParameterError("pool size must be >= 1");
    detail::require_rank(input.shape(), 4, "avg_pool");
    const std::size_t h = input.size(2);
    const std::size_t w = input.size(3);
    if (h % k != 0 || w % k != 0) {
        throw DimensionError("avg_pool: " + shape_str(input.shape()) + " not divisible by " +
                             std::to_string(k));
    }
    const std::size_t planes = input.size(0) * input.size(1);
    const std::size_t oh = h / k;
    const std::size_t ow = w / k;
    const T scale = T(1) / static_cast<T>(k * k);
    Tensor<T> out(Shape{input.size(0), input.size(1), oh, ow});
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = input.ptr() + p * h * w;
        T* dst = out.ptr() + p * oh * ow;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) dst[(y / k) * ow + x / k] += src[y * w + x];
        for (std::size_t i = 0; i < oh * ow; ++i) dst[i] *= scale;
    }
    if (!detail::should_record<T>({&input})) return out;
    Tape<T>::active()->record(out, [input, k, planes, h, w, scale](std::span<const T> g) {
        std::span<T> gx = detail::grad_sink(input);
        const std::size_t oh = h / k;
        const std::size_t ow = w / k;
        for (std::size_t p = 0; p < planes; ++p) {
            T* dst = gx.data() + p * h * w;
            const T* src = g.data() + p * oh * ow;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) dst[y * w + x] += src[(y / k) * ow + x / k] * scale;
        }
    });
    return out;
}

#define RLMS_INSTANTIATE(T)                                                                      \
    template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*,          \
                                 std::size_t, std::size_t);                                     \
    template Tensor<T> upsample_nearest<T>(const Tensor<T>&, std::size_t);                      \
    template Tensor<T> avg_pool<T>(const Tensor<T>&, std::size_t);

RLMS_INSTANTIATE(float)
RLMS_INSTANTIATE(double)
#undef RLMS_INSTANTIATE

}  // namespace rlms
