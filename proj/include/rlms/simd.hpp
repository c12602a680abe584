#pragma once

#include <cstddef>
#include <string_view>

// Hot inner loops with one scalar reference implementation and per-ISA
// variants. The active variant is chosen once from CPUID and may be pinned
// with RLMS_SIMD={scalar,avx2,avx512} or set_isa().

namespace rlms::simd {

enum class Isa { scalar, avx2, avx512 };

std::string_view isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa best_isa();
Isa active_isa();

// Throws ParameterError when the CPU or the build lacks the ISA.
void set_isa(Isa isa);

class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_isa(isa); }
    ~ScopedIsa() { set_isa(previous_); }
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;

private:
    Isa previous_;
};

// Row-major C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C.
// op(X) is X or its transpose. When beta == 0, C is write-only.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc);

// Produces op(B) on demand instead of reading it from memory. pack() writes the
// block op(B)[p0:p0+kc, j0:j0+nc] as ceil(nc/nr) column panels laid out as
// dst[(q*kc + p)*nr + j], zero beyond column nc.
struct PanelSource {
    void (*pack)(const void* ctx, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc, std::size_t nr,
                 float* dst);
    const void* ctx;
};

// gemm() with op(B) supplied by `b`.
void gemm_panels(bool trans_a, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                 std::size_t lda, const PanelSource& b, float beta, float* c, std::size_t ldc);

// y += alpha * x
void axpy(std::size_t n, float alpha, const float* x, float* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);

// Scalar reference kernels, always available; the SIMD variants are tested against these.
namespace reference {
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c, std::size_t ldc);
template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y);
}  // namespace reference

namespace detail {
using SgemmFn = void (*)(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                         std::size_t, const float*, std::size_t, float, float*, std::size_t);
using SgemmPanelsFn = void (*)(bool, std::size_t, std::size_t, std::size_t, float, const float*, std::size_t,
                               const PanelSource&, float, float*, std::size_t);
using SaxpyFn = void (*)(std::size_t, float, const float*, float*);

struct KernelTable {
    SgemmFn sgemm = nullptr;
    SgemmPanelsFn sgemm_panels = nullptr;
    SaxpyFn saxpy = nullptr;
};

KernelTable scalar_kernels();
// Null entries when the build has no such variant.
KernelTable avx2_kernels();
KernelTable avx512_kernels();
}  // namespace detail

}  // namespace rlms::simd
