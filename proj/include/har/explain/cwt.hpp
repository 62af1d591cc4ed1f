#pragma once

#include <span>
#include <vector>

namespace har::explain {

/// |CWT| with a Morlet wavelet; row s holds scale s (ascending scale, so
/// frequencies_hz descends).
struct Scalogram {
    std::vector<std::vector<double>> magnitudes; // n_scales x T
    std::vector<double> frequencies_hz;
    std::vector<double> scales;
    double omega0 = 6.0;
};

/// Scales log-spaced so their centre frequencies cover [0.5 Hz, rate / 2].
/// The analytic wavelet 2*exp(-(s*w - omega0)^2 / 2) (w > 0) is applied in
/// the frequency domain on a zero-padded FFT, which makes a unit-amplitude
/// tone at a scale's centre frequency come out with magnitude 1.
Scalogram cwt_morlet(std::span<const double> series, double rate, int n_scales, double omega0 = 6.0);

} // namespace har::explain
