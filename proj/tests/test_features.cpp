#include "har/features.hpp"
#include "oracles/feature_oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace har;

TEST_CASE("features agree with the loop oracle") {
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
        auto w = testing::random_window(rng, 300, 0.3);
        for (std::size_t t = 0; t < 300; ++t) w.at(2, t) -= 1.0;
        const auto f = extract_features(w);
        std::array<std::vector<double>, 3> ch;
        for (int c = 0; c < 3; ++c) ch[c].assign(w.channel(c).begin(), w.channel(c).end());
        const auto o = oracle::features(ch, 30.0);
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            CHECK_MESSAGE(std::abs(f[k] - o[k]) <= 1e-9 * std::max(1.0, std::abs(o[k])), feature_names()[k]);
    }
}

TEST_CASE("feature edge cases") {
    SignalWindow w(300, 30);
    for (std::size_t t = 0; t < 300; ++t) w.at(2, t) = -1.0;
    const auto f = extract_features(w);
    CHECK(f[kStdZ] == 0.0);
    CHECK(f[kCorrXY] == 0.0);
    CHECK(f[kNormKurtosis] == 0.0);
    CHECK(f[kNormSkew] == 0.0);
    CHECK(f[kDominantFreq1] == doctest::Approx(0.1)); // all-zero spectrum ties to the lowest bins
    CHECK(f[kDominantFreq2] == doctest::Approx(0.2));

    std::vector<double> tone(300);
    for (std::size_t t = 0; t < 300; ++t) tone[t] = std::sin(2 * std::numbers::pi * 2.0 * t / 30.0);
    CHECK(dominant_frequencies(tone, 30.0).first == doctest::Approx(2.0));
}
