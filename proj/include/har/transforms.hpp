#pragma once

#include "har/rng.hpp"
#include "har/signal.hpp"

#include <array>
#include <span>
#include <vector>

namespace har {

/// Which pretext transformations were applied to a window.
struct PretextLabel {
    bool aot_applied = false;
    bool permutation_applied = false;
    bool tw_applied = false;

    bool operator==(const PretextLabel&) const = default;
};

struct TransformConfig {
    int n_chunks = 4;
    int min_chunk_len = 10;
    int tw_knots = 4;
    double tw_sigma = 0.2;
    double apply_prob = 0.5;

    /// Throws ConfigError unless the config is feasible for windows of length T.
    void validate(std::size_t T) const;
};

inline constexpr double kMinSpeed = 0.2;
inline constexpr double kMaxSpeed = 2.0;

/// Time reversal: out[c][t] = w[c][T-1-t].
SignalWindow reverse_time(const SignalWindow& w);

/// Chunk lengths (summing to T, each >= min_chunk_len) drawn uniformly over
/// all valid compositions.
std::vector<std::size_t> draw_chunk_lengths(std::size_t T, const TransformConfig& cfg, Rng& rng);

/// Non-identity permutation of n items (n >= 2).
std::vector<std::size_t> draw_nonidentity_order(std::size_t n, Rng& rng);

/// Reassemble contiguous chunks of `w` (given lengths) in `order`.
SignalWindow permute_chunks(const SignalWindow& w, std::span<const std::size_t> lengths,
                            std::span<const std::size_t> order);
SignalWindow permute_chunks(const SignalWindow& w, const TransformConfig& cfg, Rng& rng);

/// Warp path from anchor speeds (equally spaced over [0, T-1], endpoints
/// included): natural cubic spline, clamped to [kMinSpeed, kMaxSpeed],
/// trapezoid-integrated and rescaled to span [0, T-1].
std::vector<double> warp_path(std::span<const double> anchor_speeds, std::size_t T);

/// Resample each channel linearly at the (monotone) positions in `path`.
SignalWindow apply_warp(const SignalWindow& w, std::span<const double> path);

/// Draws tw_knots + 2 speeds from N(1, tw_sigma^2) clamped to [0.2, 2.0].
std::vector<double> draw_warp_speeds(const TransformConfig& cfg, Rng& rng);
SignalWindow time_warp(const SignalWindow& w, const TransformConfig& cfg, Rng& rng);

using Matrix3 = std::array<std::array<double, 3>, 3>;

Matrix3 identity3();
Matrix3 multiply(const Matrix3& a, const Matrix3& b);
Matrix3 transpose(const Matrix3& a);
double determinant(const Matrix3& a);

/// R = P * S * Q: random axis permutation, random sign flips, and a
/// uniformly random axis-angle rotation.
Matrix3 draw_rotation(Rng& rng);
SignalWindow rotate(const SignalWindow& w, const Matrix3& R);
SignalWindow random_rotation(const SignalWindow& w, Rng& rng);

struct PretextSample {
    SignalWindow window;
    PretextLabel label;
};

/// Independently applies permutation -> time warp -> time reversal, each with
/// probability cfg.apply_prob.
PretextSample apply_pretext(const SignalWindow& w, const TransformConfig& cfg, Rng& rng);

} // namespace har
