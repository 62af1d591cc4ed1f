// AVX2/FMA kernels. Compiled with -mavx2 -mfma; only reached through the
// dispatch table after a CPUID check.

#include "har/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <vector>

namespace har::simd {

namespace {

constexpr std::size_t kMR = 4;  // rows per packed A panel
constexpr std::size_t kNR = 24; // columns per register tile (3 vectors)
constexpr std::size_t kMC = 64; // rows per cache block of A

alignas(32) const std::int32_t kMaskTable[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                 0,  0,  0,  0,  0,  0,  0,  0};

inline __m256i tail_mask(std::size_t n) {
    return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMaskTable + 8 - n));
}

inline float hsum(__m256 v) {
    __m128 lo = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    return _mm_cvtss_f32(_mm_add_ss(s, sh));
}

inline double hsum(__m256d v) {
    __m128d lo = _mm_add_pd(_mm256_castpd256_pd128(v), _mm256_extractf128_pd(v, 1));
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// Packs rows [i0, i0+rows) of op(A) into K x kMR interleaved storage,
// zero-filling missing rows.
void pack_panel(bool trans, std::size_t i0, std::size_t rows, std::size_t K, const float* A,
                std::size_t lda, float* dst) {
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t r = 0; r < kMR; ++r) {
            float v = 0.0f;
            if (r < rows) v = trans ? A[k * lda + i0 + r] : A[(i0 + r) * lda + k];
            dst[k * kMR + r] = v;
        }
    }
}

// 4 x 24 register tile.
inline void tile_4x24(std::size_t K, const float* Ap, const float* B, std::size_t ldb, float* C,
                      std::size_t ldc, std::size_t rows, bool accumulate) {
    __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps(), c02 = _mm256_setzero_ps();
    __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps(), c12 = _mm256_setzero_ps();
    __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps(), c22 = _mm256_setzero_ps();
    __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps(), c32 = _mm256_setzero_ps();
    for (std::size_t k = 0; k < K; ++k) {
        const float* b = B + k * ldb;
        const __m256 b0 = _mm256_loadu_ps(b);
        const __m256 b1 = _mm256_loadu_ps(b + 8);
        const __m256 b2 = _mm256_loadu_ps(b + 16);
        const float* a = Ap + k * kMR;
        __m256 av = _mm256_broadcast_ss(a);
        c00 = _mm256_fmadd_ps(av, b0, c00);
        c01 = _mm256_fmadd_ps(av, b1, c01);
        c02 = _mm256_fmadd_ps(av, b2, c02);
        av = _mm256_broadcast_ss(a + 1);
        c10 = _mm256_fmadd_ps(av, b0, c10);
        c11 = _mm256_fmadd_ps(av, b1, c11);
        c12 = _mm256_fmadd_ps(av, b2, c12);
        av = _mm256_broadcast_ss(a + 2);
        c20 = _mm256_fmadd_ps(av, b0, c20);
        c21 = _mm256_fmadd_ps(av, b1, c21);
        c22 = _mm256_fmadd_ps(av, b2, c22);
        av = _mm256_broadcast_ss(a + 3);
        c30 = _mm256_fmadd_ps(av, b0, c30);
        c31 = _mm256_fmadd_ps(av, b1, c31);
        c32 = _mm256_fmadd_ps(av, b2, c32);
    }
    const __m256 acc[4][3] = {{c00, c01, c02}, {c10, c11, c12}, {c20, c21, c22}, {c30, c31, c32}};
    for (std::size_t r = 0; r < rows; ++r) {
        float* dst = C + r * ldc;
        for (int w = 0; w < 3; ++w) {
            __m256 v = acc[r][w];
            if (accumulate) v = _mm256_add_ps(v, _mm256_loadu_ps(dst + 8 * w));
            _mm256_storeu_ps(dst + 8 * w, v);
        }
    }
}

// 4 x n tile with n <= 8, masked when n < 8.
inline void tile_4x8(std::size_t K, const float* Ap, const float* B, std::size_t ldb, float* C,
                     std::size_t ldc, std::size_t rows, std::size_t n, bool accumulate) {
    const __m256i mask = tail_mask(n);
    __m256 c0 = _mm256_setzero_ps(), c1 = _mm256_setzero_ps();
    __m256 c2 = _mm256_setzero_ps(), c3 = _mm256_setzero_ps();
    for (std::size_t k = 0; k < K; ++k) {
        const __m256 b = n == 8 ? _mm256_loadu_ps(B + k * ldb) : _mm256_maskload_ps(B + k * ldb, mask);
        const float* a = Ap + k * kMR;
        c0 = _mm256_fmadd_ps(_mm256_broadcast_ss(a), b, c0);
        c1 = _mm256_fmadd_ps(_mm256_broadcast_ss(a + 1), b, c1);
        c2 = _mm256_fmadd_ps(_mm256_broadcast_ss(a + 2), b, c2);
        c3 = _mm256_fmadd_ps(_mm256_broadcast_ss(a + 3), b, c3);
    }
    const __m256 acc[4] = {c0, c1, c2, c3};
    for (std::size_t r = 0; r < rows; ++r) {
        float* dst = C + r * ldc;
        __m256 v = acc[r];
        if (n == 8) {
            if (accumulate) v = _mm256_add_ps(v, _mm256_loadu_ps(dst));
            _mm256_storeu_ps(dst, v);
        } else {
            if (accumulate) v = _mm256_add_ps(v, _mm256_maskload_ps(dst, mask));
            _mm256_maskstore_ps(dst, mask, v);
        }
    }
}

void gemm_packed(bool transA, std::size_t M, std::size_t N, std::size_t K, const float* A,
                 std::size_t lda, const float* B, std::size_t ldb, float* C, std::size_t ldc,
                 bool accumulate) {
    if (M == 0 || N == 0) return;
    if (K == 0) {
        if (!accumulate)
            for (std::size_t i = 0; i < M; ++i) std::fill(C + i * ldc, C + i * ldc + N, 0.0f);
        return;
    }
    thread_local std::vector<float> packed;
    for (std::size_t ib = 0; ib < M; ib += kMC) {
        const std::size_t mb = std::min(kMC, M - ib);
        const std::size_t panels = (mb + kMR - 1) / kMR;
        packed.resize(panels * K * kMR);
        for (std::size_t p = 0; p < panels; ++p) {
            const std::size_t i0 = ib + p * kMR;
            pack_panel(transA, i0, std::min(kMR, M - i0), K, A, lda, packed.data() + p * K * kMR);
        }
        std::size_t j = 0;
        for (; j + kNR <= N; j += kNR) {
            for (std::size_t p = 0; p < panels; ++p) {
                const std::size_t i0 = ib + p * kMR;
                tile_4x24(K, packed.data() + p * K * kMR, B + j, ldb, C + i0 * ldc + j, ldc,
                          std::min(kMR, M - i0), accumulate);
            }
        }
        for (; j < N; j += 8) {
            const std::size_t n = std::min<std::size_t>(8, N - j);
            for (std::size_t p = 0; p < panels; ++p) {
                const std::size_t i0 = ib + p * kMR;
                tile_4x8(K, packed.data() + p * K * kMR, B + j, ldb, C + i0 * ldc + j, ldc,
                         std::min(kMR, M - i0), n, accumulate);
            }
        }
    }
}

void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
             const float* B, std::size_t ldb, float* C, std::size_t ldc, bool accumulate) {
    gemm_packed(false, M, N, K, A, lda, B, ldb, C, ldc, accumulate);
}

void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
             const float* B, std::size_t ldb, float* C, std::size_t ldc, bool accumulate) {
    gemm_packed(true, M, N, K, A, lda, B, ldb, C, ldc, accumulate);
}

// RI x RJ block of dot products over the shared K dimension.
template <int RI, int RJ>
void dot_block(std::size_t K, const float* A, std::size_t lda, const float* B, std::size_t ldb,
               float* C, std::size_t ldc, bool accumulate) {
    __m256 acc[RI][RJ];
    for (int i = 0; i < RI; ++i)
        for (int j = 0; j < RJ; ++j) acc[i][j] = _mm256_setzero_ps();
    std::size_t k = 0;
    for (; k + 8 <= K; k += 8) {
        __m256 b[RJ];
        for (int j = 0; j < RJ; ++j) b[j] = _mm256_loadu_ps(B + j * ldb + k);
        for (int i = 0; i < RI; ++i) {
            const __m256 a = _mm256_loadu_ps(A + i * lda + k);
            for (int j = 0; j < RJ; ++j) acc[i][j] = _mm256_fmadd_ps(a, b[j], acc[i][j]);
        }
    }
    for (int i = 0; i < RI; ++i) {
        for (int j = 0; j < RJ; ++j) {
            float s = hsum(acc[i][j]);
            for (std::size_t t = k; t < K; ++t) s += A[i * lda + t] * B[j * ldb + t];
            float& dst = C[i * ldc + j];
            dst = accumulate ? dst + s : s;
        }
    }
}

using DotBlockFn = void (*)(std::size_t, const float*, std::size_t, const float*, std::size_t,
                            float*, std::size_t, bool);

template <int RI>
DotBlockFn pick_dot_block(std::size_t rj) {
    switch (rj) {
    case 1: return &dot_block<RI, 1>;
    case 2: return &dot_block<RI, 2>;
    default: return &dot_block<RI, 3>;
    }
}

DotBlockFn pick_dot_block(std::size_t ri, std::size_t rj) {
    switch (ri) {
    case 1: return pick_dot_block<1>(rj);
    case 2: return pick_dot_block<2>(rj);
    case 3: return pick_dot_block<3>(rj);
    default: return pick_dot_block<4>(rj);
    }
}

void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const float* A, std::size_t lda,
             const float* B, std::size_t ldb, float* C, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < M; i += 4) {
        const std::size_t ri = std::min<std::size_t>(4, M - i);
        for (std::size_t j = 0; j < N; j += 3) {
            const std::size_t rj = std::min<std::size_t>(3, N - j);
            pick_dot_block(ri, rj)(K, A + i * lda, lda, B + j * ldb, ldb, C + i * ldc + j, ldc,
                                   accumulate);
        }
    }
}

void affine(const float* x, float a, float b, float* y, std::size_t n, bool relu) {
    const __m256 av = _mm256_set1_ps(a), bv = _mm256_set1_ps(b), zero = _mm256_setzero_ps();
    std::size_t i = 0;
    if (relu) {
        for (; i + 8 <= n; i += 8)
            _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), bv), zero));
    } else {
        for (; i + 8 <= n; i += 8)
            _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), bv));
    }
    for (; i < n; ++i) {
        const float v = a * x[i] + b;
        y[i] = relu ? (v > 0.0f ? v : 0.0f) : v;
    }
}

void relu_backward(const float* y, const float* dy, float* dx, std::size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 m = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(m, _mm256_loadu_ps(dy + i)));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0f ? dy[i] : 0.0f;
}

void add(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void moments(const float* x, std::size_t n, double center, double* sum, double* sumsq) {
    const __m256d c = _mm256_set1_pd(center);
    __m256d s = _mm256_setzero_pd(), ss = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_cvtps_pd(_mm_loadu_ps(x + i));
        const __m256d d = _mm256_sub_pd(v, c);
        s = _mm256_add_pd(s, v);
        ss = _mm256_fmadd_pd(d, d, ss);
    }
    double ts = hsum(s), tss = hsum(ss);
    for (; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - center;
        ts += x[i];
        tss += d * d;
    }
    *sum = ts;
    *sumsq = tss;
}

void bn_reduce(const float* x, const float* dy, std::size_t n, float mean, double* sum_dy,
               double* sum_dy_xc) {
    const __m256 mv = _mm256_set1_ps(mean);
    __m256d s = _mm256_setzero_pd(), sx = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m128 xc = _mm_sub_ps(_mm_loadu_ps(x + i), _mm256_castps256_ps128(mv));
        const __m256d g = _mm256_cvtps_pd(_mm_loadu_ps(dy + i));
        s = _mm256_add_pd(s, g);
        sx = _mm256_fmadd_pd(g, _mm256_cvtps_pd(xc), sx);
    }
    double ts = hsum(s), tsx = hsum(sx);
    for (; i < n; ++i) {
        ts += dy[i];
        tsx += static_cast<double>(dy[i]) * static_cast<double>(x[i] - mean);
    }
    *sum_dy = ts;
    *sum_dy_xc = tsx;
}

void bn_apply(const float* x, const float* dy, std::size_t n, float mean, float k1, float k2,
              float k3, float* dx, bool accumulate) {
    const __m256 mv = _mm256_set1_ps(mean), k1v = _mm256_set1_ps(k1), k2v = _mm256_set1_ps(k2),
                 k3v = _mm256_set1_ps(k3);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 xc = _mm256_sub_ps(_mm256_loadu_ps(x + i), mv);
        const __m256 inner = _mm256_sub_ps(_mm256_sub_ps(_mm256_loadu_ps(dy + i), k2v),
                                           _mm256_mul_ps(k3v, xc));
        __m256 v = _mm256_mul_ps(k1v, inner);
        if (accumulate) v = _mm256_add_ps(v, _mm256_loadu_ps(dx + i));
        _mm256_storeu_ps(dx + i, v);
    }
    for (; i < n; ++i) {
        const float v = k1 * (dy[i] - k2 - k3 * (x[i] - mean));
        dx[i] = accumulate ? dx[i] + v : v;
    }
}

} // namespace

const KernelTable& avx2_table() noexcept {
    static const KernelTable t{
        Isa::avx2, &gemm_nn, &gemm_tn, &gemm_nt,  &affine,   &relu_backward,
        &add,      &moments, &bn_reduce, &bn_apply,
    };
    return t;
}

} // namespace har::simd
