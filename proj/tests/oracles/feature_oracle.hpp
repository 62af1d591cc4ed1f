#pragma once

// Straight-line reimplementation of the 20 window features: plain loops,
// an O(n^2) DFT instead of FFTW, and full sorts for medians.

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

inline double mean(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

inline double pstd(const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

inline double range(const std::vector<double>& x) {
    double lo = x[0], hi = x[0];
    for (double v : x) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    return hi - lo;
}

inline double corr(const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = mean(a), mb = mean(b);
    double num = 0.0, da = 0.0, db = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        da += (a[i] - ma) * (a[i] - ma);
        db += (b[i] - mb) * (b[i] - mb);
    }
    if (da == 0.0 || db == 0.0) return 0.0;
    return num / std::sqrt(da * db);
}

inline double median(std::vector<double> x) {
    // insertion sort, deliberately naive
    for (std::size_t i = 1; i < x.size(); ++i)
        for (std::size_t j = i; j > 0 && x[j - 1] > x[j]; --j) std::swap(x[j - 1], x[j]);
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : (x[n / 2 - 1] + x[n / 2]) / 2.0;
}

inline std::array<double, 2> dominant(const std::vector<double>& x, double rate) {
    const std::size_t n = x.size();
    const double m = mean(x);
    std::vector<double> p(n / 2 + 1, 0.0);
    for (std::size_t k = 1; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double a = -2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
            re += (x[t] - m) * std::cos(a);
            im += (x[t] - m) * std::sin(a);
        }
        p[k] = re * re + im * im;
    }
    std::size_t b1 = 1;
    for (std::size_t k = 2; k <= n / 2; ++k)
        if (p[k] > p[b1]) b1 = k;
    std::size_t b2 = b1 == 1 ? 2 : 1;
    for (std::size_t k = 1; k <= n / 2; ++k)
        if (k != b1 && p[k] > p[b2]) b2 = k;
    const double df = rate / static_cast<double>(n);
    return {static_cast<double>(b1) * df, static_cast<double>(b2) * df};
}

/// channels[c][t]; returns values in the library's feature order.
inline std::array<double, 20> features(const std::array<std::vector<double>, 3>& ch, double rate) {
    std::array<double, 20> f{};
    for (int c = 0; c < 3; ++c) {
        f[c] = mean(ch[c]);
        f[3 + c] = pstd(ch[c]);
        f[6 + c] = range(ch[c]);
    }
    f[9] = corr(ch[0], ch[1]);
    f[10] = corr(ch[0], ch[2]);
    f[11] = corr(ch[1], ch[2]);
    std::vector<double> norm(ch[0].size());
    for (std::size_t t = 0; t < norm.size(); ++t)
        norm[t] = std::sqrt(ch[0][t] * ch[0][t] + ch[1][t] * ch[1][t] + ch[2][t] * ch[2][t]);
    f[12] = mean(norm);
    f[13] = pstd(norm);
    f[14] = range(norm);
    const double med = median(norm);
    std::vector<double> dev(norm.size());
    for (std::size_t t = 0; t < norm.size(); ++t) dev[t] = std::fabs(norm[t] - med);
    f[15] = median(dev);
    const double m = f[12], sd = f[13];
    double s3 = 0.0, s4 = 0.0;
    for (double v : norm) {
        const double z = sd > 0.0 ? (v - m) / sd : 0.0;
        s3 += z * z * z;
        s4 += z * z * z * z;
    }
    const auto n = static_cast<double>(norm.size());
    f[16] = sd > 0.0 ? s4 / n - 3.0 : 0.0;
    f[17] = sd > 0.0 ? s3 / n : 0.0;
    const auto d = dominant(norm, rate);
    f[18] = d[0];
    f[19] = d[1];
    return f;
}

} // namespace oracle
