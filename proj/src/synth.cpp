#include "har/synth.hpp"

#include "har/error.hpp"
#include "har/rng.hpp"
#include "har/transforms.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace har {

// Band-limited sawtooth: asymmetric in time but continuous, so chunk
// boundaries of a shuffled window remain visible.
constexpr std::size_t kSawTerms = 4;

SynthSpec SynthSpec::standard() {
    SynthSpec s;
    s.classes = {
        {"walk", 1.8, 0.35, {0.0, 0.15, 0.05}, 0.03},
        {"run", 2.6, 0.70, {0.0, 0.30, 0.10}, 0.05},
        {"cycle", 1.2, 0.10, {0.20, 0.0, 0.08}, 0.02},
        {"chores", 0.6, 0.25, {0.05, 0.10, 0.0}, 0.04},
    };
    return s;
}

void SynthSpec::validate() const {
    if (n_subjects < 1 || days_per_subject < 1 || windows_per_day < 1)
        throw ConfigError("synthetic corpus needs positive subject, day and window counts");
    if (days_per_subject > 0xFFFF) throw ConfigError("days_per_subject too large");
    if (classes.empty()) throw ConfigError("synthetic corpus needs at least one class");
    if (!(static_fraction >= 0.0 && static_fraction < 1.0)) throw ConfigError("static_fraction must be in [0, 1)");
    if (!(gain_jitter >= 0.0 && gain_jitter < 1.0)) throw ConfigError("gain_jitter must be in [0, 1)");
    if (!(freq_jitter >= 0.0 && freq_jitter < 0.5)) throw ConfigError("freq_jitter must be in [0, 0.5)");
    if (!(drift_amp >= 0.0 && drift_amp < 1.0)) throw ConfigError("drift_amp must be in [0, 1)");
    if (!(envelope_depth >= 0.0 && envelope_depth < 1.0)) throw ConfigError("envelope_depth must be in [0, 1)");
    bool asymmetric = false;
    for (const auto& c : classes) {
        if (!(c.fundamental_hz > 0.0) || c.fundamental_hz * static_cast<double>(std::max(c.harmonics.size(), kSawTerms)) >=
                                              kCanonicalRate / 2.0)
            throw ConfigError(fmt::format("class {}: frequencies must be positive and below Nyquist", c.name));
        if (!(c.noise_std >= 0.0)) throw ConfigError(fmt::format("class {}: noise_std must be >= 0", c.name));
        if (c.sawtooth_amp != 0.0) asymmetric = true;
    }
    if (!asymmetric)
        throw ConfigError("every class waveform is time-symmetric; at least one class needs a nonzero sawtooth "
                          "component or the arrow-of-time task cannot be learned");
}

namespace {

constexpr double kStaticNoise = 0.002;

std::array<double, 3> rotate_vec(const Matrix3& R, const std::array<double, 3>& v) {
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) out[i] = R[i][0] * v[0] + R[i][1] * v[1] + R[i][2] * v[2];
    return out;
}

struct Subject {
    Matrix3 orientation;
    double gain = 1.0;
    double cadence = 1.0;
};

SignalWindow moving_window(const SynthClass& c, const Subject& s, const SynthSpec& spec, Rng& rng) {
    constexpr std::size_t T = kCanonicalLength;
    const double f = c.fundamental_hz * s.cadence * (1.0 + spec.freq_jitter * (2.0 * rng.uniform() - 1.0));
    const double phase = rng.uniform();
    const double amp = s.gain * (0.85 + 0.3 * rng.uniform());
    // Slow sway: under one cycle per window.
    const double drift_f = 0.03 + 0.05 * rng.uniform();
    const double drift_phase = rng.uniform();
    const double drift = spec.drift_amp * (0.5 + 0.5 * rng.uniform());
    const std::array<double, 3> drift_axis = {0.0, 0.8, 0.6};
    const double env_f = 0.05 + 0.1 * rng.uniform();
    const double env_phase = rng.uniform();
    // Motion axis in the body frame: mostly vertical (along gravity) with a
    // forward tilt; gravity points down (-z).
    const std::array<double, 3> gravity = {0.0, 0.0, -1.0};
    const std::array<double, 3> axis = {0.6, 0.0, 0.8};
    const std::array<double, 3> side = {0.0, 1.0, 0.0};
    SignalWindow w(T, kCanonicalRate);
    for (std::size_t t = 0; t < T; ++t) {
        const double cyc = f * static_cast<double>(t) / kCanonicalRate + phase;
        double saw = 0.0;
        for (std::size_t k = 1; k <= kSawTerms; ++k)
            saw += (k % 2 ? 2.0 : -2.0) / (std::numbers::pi * static_cast<double>(k)) *
                   std::sin(2.0 * std::numbers::pi * static_cast<double>(k) * cyc);
        double m = c.sawtooth_amp * saw;
        for (std::size_t k = 0; k < c.harmonics.size(); ++k)
            m += c.harmonics[k] * std::cos(2.0 * std::numbers::pi * static_cast<double>(k + 1) * cyc);
        m *= 1.0 + spec.envelope_depth *
                       std::sin(2.0 * std::numbers::pi * (env_f * static_cast<double>(t) / kCanonicalRate + env_phase));
        const double sway = 0.1 * c.sawtooth_amp * std::sin(std::numbers::pi * cyc);
        std::array<double, 3> body{};
        const double d =
            drift * std::sin(2.0 * std::numbers::pi * (drift_f * static_cast<double>(t) / kCanonicalRate + drift_phase));
        for (int i = 0; i < 3; ++i) body[i] = gravity[i] + amp * (m * axis[i] + sway * side[i]) + d * drift_axis[i];
        const auto dev = rotate_vec(s.orientation, body);
        for (int i = 0; i < 3; ++i) w.at(i, t) = dev[i] + c.noise_std * rng.normal();
    }
    return w;
}

SignalWindow static_window(const Subject& s, Rng& rng) {
    constexpr std::size_t T = kCanonicalLength;
    const auto g = rotate_vec(s.orientation, {0.0, 0.0, -1.0});
    SignalWindow w(T, kCanonicalRate);
    for (std::size_t t = 0; t < T; ++t)
        for (int i = 0; i < 3; ++i) w.at(i, t) = g[i] + kStaticNoise * rng.normal();
    return w;
}

} // namespace

WindowStore generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    WindowStore store(kCanonicalLength, kCanonicalRate, spec.labelled);
    const Rng root(spec.seed, 0x5359);
    const auto n_static = static_cast<std::size_t>(
        std::llround(spec.static_fraction * static_cast<double>(spec.windows_per_day)));
    const int width = static_cast<int>(std::to_string(spec.n_subjects).size());
    for (int si = 0; si < spec.n_subjects; ++si) {
        Rng srng = root.split(static_cast<std::uint64_t>(si));
        Subject subj;
        subj.orientation = draw_rotation(srng);
        subj.gain = 1.0 + spec.gain_jitter * (2.0 * srng.uniform() - 1.0);
        subj.cadence = 1.0 + spec.freq_jitter * (2.0 * srng.uniform() - 1.0);
        const std::string id = fmt::format("S{:0{}}", si + 1, std::max(width, 2));
        for (int d = 0; d < spec.days_per_subject; ++d) {
            Rng drng = srng.split(1000 + static_cast<std::uint64_t>(d));
            const auto W = static_cast<std::size_t>(spec.windows_per_day);
            // Static positions: the first n_static entries of a shuffled day.
            std::vector<std::size_t> order(W);
            for (std::size_t i = 0; i < W; ++i) order[i] = i;
            for (std::size_t i = W - 1; i > 0; --i) std::swap(order[i], order[drng.below(i + 1)]);
            std::vector<char> is_static(W, 0);
            for (std::size_t i = 0; i < n_static; ++i) is_static[order[i]] = 1;
            for (std::size_t i = 0; i < W; ++i) {
                Rng wrng = drng.split(i);
                if (is_static[i]) {
                    store.append(static_window(subj, wrng), id, d,
                                 spec.labelled ? std::optional<int>(spec.static_class()) : std::nullopt);
                } else {
                    const auto cls = static_cast<int>(wrng.below(spec.classes.size()));
                    store.append(moving_window(spec.classes[cls], subj, spec, wrng), id, d,
                                 spec.labelled ? std::optional<int>(cls) : std::nullopt);
                }
            }
        }
    }
    return store;
}

} // namespace har
