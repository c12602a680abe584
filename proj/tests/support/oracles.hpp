#pragma once

// Independent reference evaluations used as test oracles. Nothing here calls
// into the library's kernels; plain loops in double precision only.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// Direct six-nested-loop convolution (per output element a full sum), zero padding.
inline std::vector<double> conv2d_direct(const std::vector<double>& in, std::size_t n, std::size_t c,
                                         std::size_t h, std::size_t w, const std::vector<double>& wt,
                                         std::size_t f, std::size_t kh, std::size_t kw,
                                         const std::vector<double>* bias, std::size_t stride,
                                         std::size_t pad, std::size_t& ho, std::size_t& wo) {
    ho = (h + 2 * pad - kh) / stride + 1;
    wo = (w + 2 * pad - kw) / stride + 1;
    std::vector<double> out(n * f * ho * wo, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t o = 0; o < f; ++o)
            for (std::size_t y = 0; y < ho; ++y)
                for (std::size_t x = 0; x < wo; ++x) {
                    double acc = bias ? (*bias)[o] : 0.0;
                    for (std::size_t ch = 0; ch < c; ++ch)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                                const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w))
                                    continue;
                                acc += in[((b * c + ch) * h + iy) * w + ix] *
                                       wt[((o * c + ch) * kh + ky) * kw + kx];
                            }
                    out[((b * f + o) * ho + y) * wo + x] = acc;
                }
    return out;
}

struct MeanStd {
    double mean;
    double std;
};

// Two-pass population statistics with the 1e-5 variance guard.
inline MeanStd two_pass_stats(const double* x, std::size_t count) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += x[i];
    const double mu = s / static_cast<double>(count);
    double v = 0.0;
    for (std::size_t i = 0; i < count; ++i) v += (x[i] - mu) * (x[i] - mu);
    return {mu, std::sqrt(v / static_cast<double>(count) + 1e-5)};
}

// Single-window SSIM written straight from the formula, 8-bit luma scale.
inline double ssim_window(const std::vector<double>& a, const std::vector<double>& b) {
    const double c1 = (0.01 * 255) * (0.01 * 255);
    const double c2 = (0.03 * 255) * (0.03 * 255);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double va = 0, vb = 0, cov = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
        cov += (a[i] - ma) * (b[i] - mb);
    }
    va /= n;
    vb /= n;
    cov /= n;
    return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

}  // namespace oracle
