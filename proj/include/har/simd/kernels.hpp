#pragma once

// Dense float kernels used by the network. Every entry has a scalar
// reference implementation and, on x86-64, an AVX2/FMA variant. The active
// table is chosen once at startup from CPUID; HAR_ISA=scalar forces the
// reference path.

#include <cstddef>
#include <string_view>

namespace har::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
    Isa isa;

    // C(MxN) = [C +] A(MxK) * B(KxN); all row-major.
    void (*gemm_nn)(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
                    const float* B, std::size_t ldb, float* C, std::size_t ldc, bool accumulate);
    // C(MxN) = [C +] A^T * B where A is stored KxM.
    void (*gemm_tn)(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
                    const float* B, std::size_t ldb, float* C, std::size_t ldc, bool accumulate);
    // C(MxN) = [C +] A * B^T where B is stored NxK.
    void (*gemm_nt)(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
                    const float* B, std::size_t ldb, float* C, std::size_t ldc, bool accumulate);

    // y = max(a*x + b, 0) (relu=true) or y = a*x + b.
    void (*affine)(const float* x, float a, float b, float* y, std::size_t n, bool relu);
    // dx = dy where y > 0, else 0 (y is the ReLU output).
    void (*relu_backward)(const float* y, const float* dy, float* dx, std::size_t n);
    // y += x
    void (*add)(const float* x, float* y, std::size_t n);
    // sum and sum of squared deviations from `center`, accumulated in double.
    void (*moments)(const float* x, std::size_t n, double center, double* sum, double* sumsq);
    // sum(dy) and sum(dy * (x - mean)), accumulated in double.
    void (*bn_reduce)(const float* x, const float* dy, std::size_t n, float mean, double* sum_dy,
                      double* sum_dy_xc);
    // dx = k1 * (dy - k2 - k3 * (x - mean)); accumulate adds into dx.
    void (*bn_apply)(const float* x, const float* dy, std::size_t n, float mean, float k1, float k2,
                     float k3, float* dx, bool accumulate);
};

/// True if the running CPU can execute kernels for `isa`.
bool isa_supported(Isa isa) noexcept;

/// Table for a specific ISA. Requesting an unsupported ISA returns scalar.
const KernelTable& table(Isa isa) noexcept;

/// Active table: best supported ISA unless HAR_ISA overrides it.
const KernelTable& active() noexcept;

const KernelTable& scalar_table() noexcept;
#if defined(HAR_HAVE_AVX2)
const KernelTable& avx2_table() noexcept;
#endif

} // namespace har::simd
