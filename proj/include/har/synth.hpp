#pragma once

#include "har/window_store.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace har {

/// One synthetic activity: a band-limited sawtooth at the fundamental plus cosine
/// harmonics, projected onto a body-frame motion axis, plus white noise.
struct SynthClass {
    std::string name;
    double fundamental_hz = 1.0;
    double sawtooth_amp = 0.0;
    /// harmonics[i] scales cos((i + 1) * 2*pi*f*t).
    std::vector<double> harmonics;
    double noise_std = 0.02;
};

/// Generator description. The default corpus is versioned: changing any
/// default changes acceptance numbers, so bump kVersion with it.
struct SynthSpec {
    static constexpr int kVersion = 2;

    int n_subjects = 24;
    int days_per_subject = 2;
    int windows_per_day = 120;
    std::vector<SynthClass> classes;
    double static_fraction = 0.0;
    double gain_jitter = 0.15;
    double freq_jitter = 0.08;
    /// Peak amplitude (g) of a slow postural sway added to moving windows.
    double drift_amp = 0.2;
    /// Depth of a slow amplitude envelope on the motion component.
    double envelope_depth = 0.5;
    bool labelled = false;
    std::uint64_t seed = 1;

    /// The four-class standard corpus (see kVersion).
    static SynthSpec standard();
    void validate() const;
    /// Class id assigned to static windows in labelled stores.
    int static_class() const { return static_cast<int>(classes.size()); }
};

/// Deterministic in the spec (including its seed).
WindowStore generate_synthetic(const SynthSpec& spec);

} // namespace har
