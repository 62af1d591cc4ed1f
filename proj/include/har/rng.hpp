#pragma once

#include <array>
#include <cstdint>

namespace har {

/// Counter-based Philox4x32-10 generator.
///
/// A stream is fully identified by (seed, stream_id); the n-th 128-bit block
/// of that stream is philox(key = seed, counter = {n, stream_id}). Any
/// implementation of Philox4x32-10 reproduces the same values, so the
/// derived distributions below are defined on top of raw 32-bit draws
/// rather than on std:: distributions whose algorithms vary by vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal via Box-Muller (one value per pair of uniforms).
    double normal() noexcept;
    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    /// Independent child stream; deterministic in (seed, stream, tag).
    Rng split(std::uint64_t tag) const noexcept;

    /// Raw block function, exposed for cross-language reproduction tests.
    static std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t stream,
                                              std::uint64_t counter) noexcept;

    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xFFFFFFFFu; }
    result_type operator()() noexcept { return next_u32(); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int pos_ = 4;
};

/// SplitMix64 finalizer, used to derive stream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

} // namespace har
