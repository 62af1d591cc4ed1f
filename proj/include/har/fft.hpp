#pragma once

// Thin RAII wrapper over FFTW. Plans are cached per size behind a mutex
// (FFTW planning is not thread-safe); execution uses the new-array API.

#include <complex>
#include <span>
#include <vector>

namespace har::fft {

/// Real-input DFT, returns bins 0..n/2.
std::vector<std::complex<double>> forward_real(std::span<const double> x);

/// Unnormalized complex DFT (sign -1) of length x.size().
std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x);

/// Inverse complex DFT, normalized by 1/n.
std::vector<std::complex<double>> inverse(std::span<const std::complex<double>> X);

} // namespace har::fft
