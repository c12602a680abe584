#pragma once

// Cache-blocked GEMM driver shared by the SIMD variants. Each variant supplies a
// Kernel type with MR/NR and a register-tile micro kernel computing
// C[MR,NR] += Apanel[kc,MR]^T * Bpanel[kc,NR]. Kernel types live in anonymous
// namespaces so instantiations compiled with different -m flags never merge;
// for the same reason this header avoids standard-library templates.

#include <cstddef>

#include "rlms/simd.hpp"

namespace rlms::simd::detail {

// Thread-local scratch owned by the baseline-compiled dispatcher.
float* gemm_workspace_a(std::size_t floats);
float* gemm_workspace_b(std::size_t floats);

template <class Kernel>
struct BlockedGemm {
    static constexpr std::size_t MR = Kernel::MR;
    static constexpr std::size_t NR = Kernel::NR;
    static constexpr std::size_t KC = 256;
    static constexpr std::size_t MC = MR * 16;
    static constexpr std::size_t NC = NR * 128;

    static std::size_t lesser(std::size_t x, std::size_t y) { return x < y ? x : y; }

    static void fill_zero(float* dst, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) dst[i] = 0.0f;
    }

    static void pack_a(bool trans_a, const float* a, std::size_t lda, std::size_t m, std::size_t i0,
                       std::size_t mc, std::size_t p0, std::size_t kc, float alpha, float* dst) {
        for (std::size_t ir = 0; ir < mc; ir += MR) {
            float* panel = dst + (ir / MR) * kc * MR;
            for (std::size_t i = 0; i < MR; ++i) {
                const std::size_t row = i0 + ir + i;
                if (ir + i >= mc || row >= m) {
                    for (std::size_t p = 0; p < kc; ++p) panel[p * MR + i] = 0.0f;
                    continue;
                }
                if (trans_a) {
                    for (std::size_t p = 0; p < kc; ++p)
                        panel[p * MR + i] = alpha * a[(p0 + p) * lda + row];
                } else {
                    const float* src = a + row * lda + p0;
                    for (std::size_t p = 0; p < kc; ++p) panel[p * MR + i] = alpha * src[p];
                }
            }
        }
    }

    static void pack_b(bool trans_b, const float* b, std::size_t ldb, std::size_t n, std::size_t j0,
                       std::size_t nc, std::size_t p0, std::size_t kc, float* dst) {
        for (std::size_t jr = 0; jr < nc; jr += NR) {
            float* panel = dst + (jr / NR) * kc * NR;
            const std::size_t valid = lesser(NR, lesser(nc - jr, n - (j0 + jr)));
            if (trans_b) {
                for (std::size_t j = 0; j < NR; ++j) {
                    if (j >= valid) {
                        for (std::size_t p = 0; p < kc; ++p) panel[p * NR + j] = 0.0f;
                        continue;
                    }
                    const float* src = b + (j0 + jr + j) * ldb + p0;
                    for (std::size_t p = 0; p < kc; ++p) panel[p * NR + j] = src[p];
                }
            } else {
                for (std::size_t p = 0; p < kc; ++p) {
                    const float* src = b + (p0 + p) * ldb + j0 + jr;
                    float* out = panel + p * NR;
                    std::size_t j = 0;
                    for (; j < valid; ++j) out[j] = src[j];
                    for (; j < NR; ++j) out[j] = 0.0f;
                }
            }
        }
    }

    static void run(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                    float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                    float beta, float* c, std::size_t ldc) {
        drive(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, nullptr, beta, c, ldc);
    }

    static void run_panels(bool trans_a, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                           std::size_t lda, const PanelSource& source, float beta, float* c, std::size_t ldc) {
        drive(trans_a, false, m, n, k, alpha, a, lda, nullptr, 0, &source, beta, c, ldc);
    }

    static void drive(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
                      const float* a, std::size_t lda, const float* b, std::size_t ldb, const PanelSource* source,
                      float beta, float* c, std::size_t ldc) {
        for (std::size_t i = 0; i < m; ++i) {
            float* row = c + i * ldc;
            if (beta == 0.0f) {
                fill_zero(row, n);
            } else if (beta != 1.0f) {
                for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
            }
        }
        if (m == 0 || n == 0 || k == 0 || alpha == 0.0f) return;

        float* a_buf = gemm_workspace_a(MC * KC);
        float* b_buf = gemm_workspace_b(KC * NC);
        alignas(64) float tile[MR * NR];

        for (std::size_t jc = 0; jc < n; jc += NC) {
            const std::size_t nc = lesser(NC, n - jc);
            for (std::size_t pc = 0; pc < k; pc += KC) {
                const std::size_t kc = lesser(KC, k - pc);
                if (source != nullptr) {
                    source->pack(source->ctx, pc, kc, jc, nc, NR, b_buf);
                } else {
                    pack_b(trans_b, b, ldb, n, jc, nc, pc, kc, b_buf);
                }
                for (std::size_t ic = 0; ic < m; ic += MC) {
                    const std::size_t mc = lesser(MC, m - ic);
                    pack_a(trans_a, a, lda, m, ic, mc, pc, kc, alpha, a_buf);
                    for (std::size_t jr = 0; jr < nc; jr += NR) {
                        const float* bp = b_buf + (jr / NR) * kc * NR;
                        const std::size_t nr = lesser(NR, nc - jr);
                        for (std::size_t ir = 0; ir < mc; ir += MR) {
                            const float* ap = a_buf + (ir / MR) * kc * MR;
                            const std::size_t mr = lesser(MR, mc - ir);
                            float* cp = c + (ic + ir) * ldc + jc + jr;
                            if (mr == MR && nr == NR) {
                                Kernel::micro(kc, ap, bp, cp, ldc);
                            } else {
                                fill_zero(tile, MR * NR);
                                Kernel::micro(kc, ap, bp, tile, NR);
                                for (std::size_t i = 0; i < mr; ++i)
                                    for (std::size_t j = 0; j < nr; ++j)
                                        cp[i * ldc + j] += tile[i * NR + j];
                            }
                        }
                    }
                }
            }
        }
    }
};

}  // namespace rlms::simd::detail
