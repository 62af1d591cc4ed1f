#pragma once

#include "har/signal.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace har {

inline constexpr std::size_t kFeatureCount = 20;

/// Hand-crafted window features. Order of `values` matches feature_names().
struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Index of each named feature.
enum Feature : std::size_t {
    kMeanX, kMeanY, kMeanZ,
    kStdX, kStdY, kStdZ,
    kRangeX, kRangeY, kRangeZ,
    kCorrXY, kCorrXZ, kCorrYZ,
    kNormMean, kNormStd, kNormRange, kNormMad, kNormKurtosis, kNormSkew,
    kDominantFreq1, kDominantFreq2,
};

const std::array<std::string_view, kFeatureCount>& feature_names();

/// Population moments; Pearson correlation (0 if either axis is constant);
/// MAD = median(|x - median|); Fisher excess kurtosis and standardized skew
/// of the norm (both 0 for a constant norm); dominant norm frequencies.
FeatureVector extract_features(const SignalWindow& w);

/// Top two frequencies (Hz) of the mean-removed periodogram, excluding DC.
/// Ties, including an all-zero spectrum, resolve to the lower frequency.
std::pair<double, double> dominant_frequencies(std::span<const double> series, double rate);

/// CSV with a header of the 20 feature names plus an optional label column.
void write_feature_csv(const std::filesystem::path& path, std::span<const FeatureVector> rows,
                       std::span<const int> labels);

} // namespace har
