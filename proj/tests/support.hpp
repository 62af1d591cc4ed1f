#pragma once

#include "har/rng.hpp"
#include "har/signal.hpp"
#include "har/synth.hpp"
#include "har/window_store.hpp"

#include <filesystem>
#include <string>

namespace testing {

inline har::SignalWindow random_window(har::Rng& rng, std::size_t T = har::kCanonicalLength, double sd = 1.0) {
    har::SignalWindow w(T, har::kCanonicalRate);
    for (auto& v : w.samples()) v = rng.normal(0.0, sd);
    return w;
}

/// Small synthetic store for fast tests.
inline har::WindowStore small_store(int subjects, int days, int windows, bool labelled, std::uint64_t seed = 3,
                                    double static_fraction = 0.0) {
    auto spec = har::SynthSpec::standard();
    spec.n_subjects = subjects;
    spec.days_per_subject = days;
    spec.windows_per_day = windows;
    spec.labelled = labelled;
    spec.seed = seed;
    spec.static_fraction = static_fraction;
    return har::generate_synthetic(spec);
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("har_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testing
