#include "har/explain/cwt.hpp"

#include "har/error.hpp"
#include "har/fft.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace har::explain {

namespace {

constexpr double kMinFrequencyHz = 0.5;

std::size_t padded_length(std::size_t n) {
    std::size_t p = 1;
    while (p < 2 * n) p <<= 1;
    return p;
}

} // namespace

Scalogram cwt_morlet(std::span<const double> series, double rate, int n_scales, double omega0) {
    if (series.size() < 8) throw InputError("CWT needs at least 8 samples");
    if (!(rate > 2.0 * kMinFrequencyHz)) throw ConfigError("sampling rate too low for the CWT frequency range");
    if (n_scales < 2) throw ConfigError("CWT needs at least 2 scales");
    if (!(omega0 > 0.0)) throw ConfigError("omega0 must be positive");

    const std::size_t T = series.size(), N = padded_length(T);
    std::vector<std::complex<double>> x(N, 0.0);
    for (std::size_t t = 0; t < T; ++t) x[t] = series[t];
    const auto X = fft::forward(x);

    Scalogram out;
    out.omega0 = omega0;
    const double f_hi = rate / 2.0, f_lo = kMinFrequencyHz;
    std::vector<std::complex<double>> Y(N);
    for (int s = 0; s < n_scales; ++s) {
        const double f = f_hi * std::pow(f_lo / f_hi, static_cast<double>(s) / (n_scales - 1));
        // Angular frequency per sample of the wavelet centre.
        const double scale = omega0 / (2.0 * std::numbers::pi * f / rate);
        out.frequencies_hz.push_back(f);
        out.scales.push_back(scale);
        for (std::size_t k = 0; k < N; ++k) {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(N);
            if (k == 0 || k > N / 2) {
                Y[k] = 0.0;
                continue;
            }
            const double d = scale * w - omega0;
            Y[k] = X[k] * (2.0 * std::exp(-0.5 * d * d));
        }
        const auto y = fft::inverse(Y);
        std::vector<double> mag(T);
        for (std::size_t t = 0; t < T; ++t) mag[t] = std::abs(y[t]);
        out.magnitudes.push_back(std::move(mag));
    }
    return out;
}

} // namespace har::explain
