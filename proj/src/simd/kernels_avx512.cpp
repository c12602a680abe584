// Compiled with -mavx512f -mfma; only reached after a CPUID check.

#include "rlms/simd.hpp"

#if defined(__AVX512F__)

#include <immintrin.h>

#include "gemm_blocked.hpp"

namespace rlms::simd::detail {

namespace {

struct Avx512Kernel {
    static constexpr std::size_t MR = 8;
    static constexpr std::size_t NR = 32;

    static void micro(std::size_t kc, const float* ap, const float* bp, float* c, std::size_t ldc) {
        __m512 acc[MR][2];
        for (std::size_t i = 0; i < MR; ++i) {
            acc[i][0] = _mm512_setzero_ps();
            acc[i][1] = _mm512_setzero_ps();
        }
        for (std::size_t p = 0; p < kc; ++p) {
            const __m512 b0 = _mm512_loadu_ps(bp);
            const __m512 b1 = _mm512_loadu_ps(bp + 16);
            for (std::size_t i = 0; i < MR; ++i) {
                const __m512 av = _mm512_set1_ps(ap[i]);
                acc[i][0] = _mm512_fmadd_ps(av, b0, acc[i][0]);
                acc[i][1] = _mm512_fmadd_ps(av, b1, acc[i][1]);
            }
            ap += MR;
            bp += NR;
        }
        for (std::size_t i = 0; i < MR; ++i) {
            float* row = c + i * ldc;
            _mm512_storeu_ps(row, _mm512_add_ps(_mm512_loadu_ps(row), acc[i][0]));
            _mm512_storeu_ps(row + 16, _mm512_add_ps(_mm512_loadu_ps(row + 16), acc[i][1]));
        }
    }
};

void sgemm_avx512(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                  float beta, float* c, std::size_t ldc) {
    BlockedGemm<Avx512Kernel>::run(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void sgemm_panels_avx512(bool trans_a, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                     std::size_t lda, const PanelSource& b, float beta, float* c, std::size_t ldc) {
    BlockedGemm<Avx512Kernel>::run_panels(trans_a, m, n, k, alpha, a, lda, b, beta, c, ldc);
}

void saxpy_avx512(std::size_t n, float alpha, const float* x, float* y) {
    const __m512 av = _mm512_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        _mm512_storeu_ps(y + i, _mm512_fmadd_ps(av, _mm512_loadu_ps(x + i), _mm512_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

KernelTable avx512_kernels() {
    return {&sgemm_avx512, &sgemm_panels_avx512, &saxpy_avx512};
}

}  // namespace rlms::simd::detail

#else

namespace rlms::simd::detail {
KernelTable avx512_kernels() {
    return {};
}
}  // namespace rlms::simd::detail

#endif
