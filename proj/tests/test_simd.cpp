#include "har/rng.hpp"
#include "har/simd/kernels.hpp"
#include "har/simd/reference.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace har;

namespace {

std::vector<float> randv(Rng& r, std::size_t n) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(r.normal());
    return v;
}

void close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
    REQUIRE(a.size() == b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(double(a[i]) - b[i]) / std::max(1.0, std::abs(double(b[i]))));
    CHECK(worst <= tol);
}

} // namespace

TEST_CASE("avx2 kernels match the scalar reference") {
    if (!simd::isa_supported(simd::Isa::avx2)) {
        MESSAGE("AVX2 unavailable; equivalence not exercised");
        return;
    }
    const auto& s = simd::scalar_table();
    const auto& v = simd::table(simd::Isa::avx2);
    REQUIRE(v.isa == simd::Isa::avx2);
    Rng r(9);
    for (auto [M, N, K] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 17, 5}, {16, 33, 9}, {7, 64, 40}, {33, 129, 17}}) {
        for (bool acc : {false, true}) {
            const auto A = randv(r, M * K), B = randv(r, K * N), C0 = randv(r, M * N);
            auto c1 = C0, c2 = C0;
            s.gemm_nn(M, N, K, A.data(), K, B.data(), N, c1.data(), N, acc);
            v.gemm_nn(M, N, K, A.data(), K, B.data(), N, c2.data(), N, acc);
            close(c2, c1, 1e-5);
            const auto At = randv(r, K * M);
            c1 = c2 = C0;
            s.gemm_tn(M, N, K, At.data(), M, B.data(), N, c1.data(), N, acc);
            v.gemm_tn(M, N, K, At.data(), M, B.data(), N, c2.data(), N, acc);
            close(c2, c1, 1e-5);
            const auto Bt = randv(r, N * K);
            c1 = c2 = C0;
            s.gemm_nt(M, N, K, A.data(), K, Bt.data(), K, c1.data(), N, acc);
            v.gemm_nt(M, N, K, A.data(), K, Bt.data(), K, c2.data(), N, acc);
            close(c2, c1, 1e-5);
        }
    }
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 300u, 1001u}) {
        const auto x = randv(r, n), dy = randv(r, n);
        for (bool relu : {false, true}) {
            std::vector<float> y1(n), y2(n);
            s.affine(x.data(), 1.3f, -0.2f, y1.data(), n, relu);
            v.affine(x.data(), 1.3f, -0.2f, y2.data(), n, relu);
            close(y2, y1, 1e-6);
        }
        std::vector<float> y(n);
        s.affine(x.data(), 1.0f, 0.0f, y.data(), n, true);
        std::vector<float> d1(n), d2(n);
        s.relu_backward(y.data(), dy.data(), d1.data(), n);
        v.relu_backward(y.data(), dy.data(), d2.data(), n);
        close(d2, d1, 0.0);
        auto a1 = dy, a2 = dy;
        s.add(x.data(), a1.data(), n);
        v.add(x.data(), a2.data(), n);
        close(a2, a1, 0.0);
        double m1 = 0, q1 = 0, m2 = 0, q2 = 0;
        s.moments(x.data(), n, 0.1, &m1, &q1);
        v.moments(x.data(), n, 0.1, &m2, &q2);
        CHECK(m2 == doctest::Approx(m1).epsilon(1e-9));
        CHECK(q2 == doctest::Approx(q1).epsilon(1e-9));
        double r1 = 0, t1 = 0, r2 = 0, t2 = 0;
        s.bn_reduce(x.data(), dy.data(), n, 0.05f, &r1, &t1);
        v.bn_reduce(x.data(), dy.data(), n, 0.05f, &r2, &t2);
        CHECK(r2 == doctest::Approx(r1).epsilon(1e-9));
        CHECK(t2 == doctest::Approx(t1).epsilon(1e-9));
        for (bool acc : {false, true}) {
            auto o1 = dy, o2 = dy;
            s.bn_apply(x.data(), dy.data(), n, 0.05f, 0.7f, 0.1f, 0.3f, o1.data(), acc);
            v.bn_apply(x.data(), dy.data(), n, 0.05f, 0.7f, 0.1f, 0.3f, o2.data(), acc);
            close(o2, o1, 1e-6);
        }
    }
}
