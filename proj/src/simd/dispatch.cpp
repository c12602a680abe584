#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "rlms/error.hpp"
#include "rlms/simd.hpp"

namespace rlms::simd {

namespace detail {

float* gemm_workspace_a(std::size_t floats) {
    thread_local std::vector<float> buf;
    if (buf.size() < floats) buf.resize(floats);
    return buf.data();
}

float* gemm_workspace_b(std::size_t floats) {
    thread_local std::vector<float> buf;
    if (buf.size() < floats) buf.resize(floats);
    return buf.data();
}

}  // namespace detail

namespace {

bool cpu_has(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Isa::avx512:
            return __builtin_cpu_supports("avx512f");
    }
    return false;
#else
    return isa == Isa::scalar;
#endif
}

detail::KernelTable table_for(Isa isa) {
    switch (isa) {
        case Isa::avx2:
            return detail::avx2_kernels();
        case Isa::avx512:
            return detail::avx512_kernels();
        case Isa::scalar:
            break;
    }
    return detail::scalar_kernels();
}

Isa parse_env_override(Isa fallback) {
    const char* env = std::getenv("RLMS_SIMD");
    if (env == nullptr) return fallback;
    const std::string name(env);
    for (Isa isa : {Isa::scalar, Isa::avx2, Isa::avx512}) {
        if (name == isa_name(isa) && isa_supported(isa)) return isa;
    }
    return fallback;
}

struct Dispatch {
    Isa isa;
    detail::KernelTable table;
};

Dispatch& state() {
    static Dispatch d = [] {
        const Isa isa = parse_env_override(best_isa());
        return Dispatch{isa, table_for(isa)};
    }();
    return d;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
        case Isa::avx512:
            return "avx512";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    return cpu_has(isa) && table_for(isa).sgemm != nullptr;
}

Isa best_isa() {
    if (isa_supported(Isa::avx512)) return Isa::avx512;
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    return Isa::scalar;
}

Isa active_isa() {
    return state().isa;
}

void set_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw ParameterError("SIMD variant not available: " + std::string(isa_name(isa)));
    }
    state() = Dispatch{isa, table_for(isa)};
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
    state().table.sgemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm_panels(bool trans_a, std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                 std::size_t lda, const PanelSource& b, float beta, float* c, std::size_t ldc) {
    state().table.sgemm_panels(trans_a, m, n, k, alpha, a, lda, b, beta, c, ldc);
}

// Double precision only serves gradient checking; it always runs the reference path.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta,
          double* c, std::size_t ldc) {
    reference::gemm<double>(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
    state().table.saxpy(n, alpha, x, y);
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    reference::axpy<double>(n, alpha, x, y);
}

}  // namespace rlms::simd
