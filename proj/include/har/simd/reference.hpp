#pragma once

// Scalar reference kernels, templated so the 64-bit network path can use
// them directly. The float instantiations back the scalar KernelTable and
// serve as the equivalence oracle for the vectorized variants.

#include <cstddef>

namespace har::simd::ref {

template <class T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < M; ++i) {
        T* c = C + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < N; ++j) c[j] = T(0);
        for (std::size_t k = 0; k < K; ++k) {
            const T a = A[i * lda + k];
            const T* b = B + k * ldb;
            for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

template <class T>
void gemm_tn(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < M; ++i) {
        T* c = C + i * ldc;
        if (!accumulate)
            for (std::size_t j = 0; j < N; ++j) c[j] = T(0);
        for (std::size_t k = 0; k < K; ++k) {
            const T a = A[k * lda + i];
            const T* b = B + k * ldb;
            for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
        }
    }
}

template <class T>
void gemm_nt(std::size_t M, std::size_t N, std::size_t K, const T* A, std::size_t lda, const T* B,
             std::size_t ldb, T* C, std::size_t ldc, bool accumulate) {
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            T acc = T(0);
            const T* a = A + i * lda;
            const T* b = B + j * ldb;
            for (std::size_t k = 0; k < K; ++k) acc += a[k] * b[k];
            C[i * ldc + j] = accumulate ? C[i * ldc + j] + acc : acc;
        }
    }
}

template <class T>
void affine(const T* x, T a, T b, T* y, std::size_t n, bool relu) {
    for (std::size_t i = 0; i < n; ++i) {
        const T v = a * x[i] + b;
        y[i] = relu ? (v > T(0) ? v : T(0)) : v;
    }
}

template <class T>
void relu_backward(const T* y, const T* dy, T* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
}

template <class T>
void add(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

template <class T>
void moments(const T* x, std::size_t n, double center, double* sum, double* sumsq) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - center;
        s += static_cast<double>(x[i]);
        ss += d * d;
    }
    *sum = s;
    *sumsq = ss;
}

template <class T>
void bn_reduce(const T* x, const T* dy, std::size_t n, T mean, double* sum_dy, double* sum_dy_xc) {
    double s = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += static_cast<double>(dy[i]);
        sx += static_cast<double>(dy[i]) * static_cast<double>(x[i] - mean);
    }
    *sum_dy = s;
    *sum_dy_xc = sx;
}

template <class T>
void bn_apply(const T* x, const T* dy, std::size_t n, T mean, T k1, T k2, T k3, T* dx,
              bool accumulate) {
    for (std::size_t i = 0; i < n; ++i) {
        const T v = k1 * (dy[i] - k2 - k3 * (x[i] - mean));
        dx[i] = accumulate ? dx[i] + v : v;
    }
}

} // namespace har::simd::ref
