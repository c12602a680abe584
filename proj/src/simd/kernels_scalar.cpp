#include <vector>

#include "rlms/simd.hpp"

namespace rlms::simd {

namespace reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc) {
    for (std::size_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        if (beta == T(0)) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = T(0);
        } else if (beta != T(1)) {
            for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
        }
        for (std::size_t p = 0; p < k; ++p) {
            const T aip = alpha * (trans_a ? a[p * lda + i] : a[i * lda + p]);
            if (trans_b) {
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * ldb + p];
            } else {
                const T* brow = b + p * ldb;
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
        }
    }
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                          std::size_t, const float*, std::size_t, float, float*, std::size_t);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, double,
                           const double*, std::size_t, const double*, std::size_t, double,
                           double*, std::size_t);
template void axpy<float>(std::size_t, float, const float*, float*);
template void axpy<double>(std::size_t, double, const double*, double*);

}  // namespace reference

namespace detail {

namespace {

// One panel as wide as the matrix is plain row-major op(B).
void gemm_panels_scalar(bool trans_a, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                        std::size_t lda, const PanelSource& b, float beta, float* c, std::size_t ldc) {
    std::vector<float> dense(k * n);
    if (k > 0 && n > 0) b.pack(b.ctx, 0, k, 0, n, n, dense.data());
    reference::gemm<float>(trans_a, false, m, n, k, alpha, a, lda, dense.data(), n, beta, c, ldc);
}

}  // namespace

KernelTable scalar_kernels() {
    return {&reference::gemm<float>, &gemm_panels_scalar, &reference::axpy<float>};
}

}  // namespace detail

}  // namespace rlms::simd
