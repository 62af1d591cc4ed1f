#include "har/features.hpp"

#include "har/error.hpp"
#include "har/fft.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace har {

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names{
        "mean_x",     "mean_y",   "mean_z",     "std_x",         "std_y",
        "std_z",      "range_x",  "range_y",    "range_z",       "corr_xy",
        "corr_xz",    "corr_yz",  "norm_mean",  "norm_std",      "norm_range",
        "norm_mad",   "norm_kurtosis", "norm_skew", "dominant_freq_1", "dominant_freq_2",
    };
    return names;
}

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double correlation(std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double range_of(std::span<const double> x) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    return *hi - *lo;
}

} // namespace

std::pair<double, double> dominant_frequencies(std::span<const double> series, double rate) {
    const std::size_t n = series.size();
    if (n < 4) throw InputError("dominant_frequencies needs at least 4 samples");
    const double m = mean_of(series);
    std::vector<double> centred(n);
    for (std::size_t i = 0; i < n; ++i) centred[i] = series[i] - m;
    const auto spectrum = fft::forward_real(centred);

    std::vector<std::size_t> bins(n / 2);
    std::iota(bins.begin(), bins.end(), std::size_t{1});
    std::vector<double> power(n / 2 + 1);
    for (std::size_t k = 1; k <= n / 2; ++k) power[k] = std::norm(spectrum[k]);
    std::stable_sort(bins.begin(), bins.end(), [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });
    const double df = rate / static_cast<double>(n);
    return {static_cast<double>(bins[0]) * df, static_cast<double>(bins[1]) * df};
}

FeatureVector extract_features(const SignalWindow& w) {
    FeatureVector f;
    for (int c = 0; c < kChannels; ++c) {
        const auto x = w.channel(c);
        f[kMeanX + c] = mean_of(x);
        f[kStdX + c] = population_std(x);
        f[kRangeX + c] = range_of(x);
    }
    f[kCorrXY] = correlation(w.channel(0), w.channel(1));
    f[kCorrXZ] = correlation(w.channel(0), w.channel(2));
    f[kCorrYZ] = correlation(w.channel(1), w.channel(2));

    const auto norm = euclidean_norm(w);
    const double nm = mean_of(norm);
    f[kNormMean] = nm;
    f[kNormStd] = population_std(norm);
    f[kNormRange] = range_of(norm);

    const double med = median_of(norm);
    std::vector<double> dev(norm.size());
    for (std::size_t i = 0; i < norm.size(); ++i) dev[i] = std::abs(norm[i] - med);
    f[kNormMad] = median_of(std::move(dev));

    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : norm) {
        const double d = v - nm;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const auto n = static_cast<double>(norm.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    f[kNormKurtosis] = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    f[kNormSkew] = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;

    const auto [f1, f2] = dominant_frequencies(norm, w.rate());
    f[kDominantFreq1] = f1;
    f[kDominantFreq2] = f2;
    return f;
}

void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureVector> rows,
                       std::span<const int> labels) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw InputError(fmt::format("cannot open {} for writing", path.string()));
    const auto& names = feature_names();
    for (std::size_t i = 0; i < kFeatureCount; ++i) os << (i ? "," : "") << names[i];
    if (!labels.empty()) os << ",label";
    os << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < kFeatureCount; ++i) os << (i ? "," : "") << fmt::format("{:.17g}", rows[r][i]);
        if (!labels.empty()) os << ',' << labels[r];
        os << '\n';
    }
}

} // namespace har
