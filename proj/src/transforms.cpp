#include "har/transforms.hpp"

#include "har/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace har {

void TransformConfig::validate(std::size_t T) const {
    if (n_chunks < 2)
        throw ConfigError(fmt::format("n_chunks={} cannot produce a non-identity permutation", n_chunks));
    if (min_chunk_len < 1) throw ConfigError("min_chunk_len must be >= 1");
    if (static_cast<std::size_t>(n_chunks) * static_cast<std::size_t>(min_chunk_len) > T)
        throw ConfigError(fmt::format("{} chunks of at least {} samples do not fit in T={}", n_chunks,
                                      min_chunk_len, T));
    if (tw_knots < 0) throw ConfigError("tw_knots must be >= 0");
    if (!(tw_sigma > 0.0 && tw_sigma <= 0.5)) throw ConfigError("tw_sigma must lie in (0, 0.5]");
    if (!(apply_prob >= 0.0 && apply_prob <= 1.0)) throw ConfigError("apply_prob must lie in [0, 1]");
}

SignalWindow reverse_time(const SignalWindow& w) {
    const std::size_t T = w.length();
    SignalWindow out(T, w.rate());
    for (int c = 0; c < kChannels; ++c)
        for (std::size_t t = 0; t < T; ++t) out.at(c, t) = w.at(c, T - 1 - t);
    return out;
}

std::vector<std::size_t> draw_chunk_lengths(std::size_t T, const TransformConfig& cfg, Rng& rng) {
    cfg.validate(T);
    const auto n = static_cast<std::size_t>(cfg.n_chunks);
    const auto m = static_cast<std::size_t>(cfg.min_chunk_len);
    // Stars and bars: the slack T - n*m is split into n non-negative parts by
    // choosing n-1 distinct bar positions out of slack + n - 1 slots.
    const std::size_t slack = T - n * m;
    const std::size_t slots = slack + n - 1;
    std::vector<std::size_t> bars;
    bars.reserve(n - 1);
    // Floyd's algorithm for a uniform (n-1)-subset of [0, slots).
    for (std::size_t j = slots - (n - 1); j < slots; ++j) {
        const std::size_t r = rng.below(j + 1);
        if (std::find(bars.begin(), bars.end(), r) == bars.end()) bars.push_back(r);
        else bars.push_back(j);
    }
    std::sort(bars.begin(), bars.end());
    std::vector<std::size_t> lengths(n);
    std::size_t prev = 0;
    for (std::size_t i = 0; i < n - 1; ++i) {
        lengths[i] = m + (bars[i] - prev);
        prev = bars[i] + 1;
    }
    lengths[n - 1] = m + (slots - prev);
    return lengths;
}

std::vector<std::size_t> draw_nonidentity_order(std::size_t n, Rng& rng) {
    if (n < 2) throw ConfigError("a non-identity order needs at least 2 chunks");
    std::vector<std::size_t> order(n);
    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
        for (std::size_t i = 0; i < n; ++i)
            if (order[i] != i) return order;
    }
}

SignalWindow permute_chunks(const SignalWindow& w, std::span<const std::size_t> lengths,
                            std::span<const std::size_t> order) {
    const std::size_t T = w.length();
    std::vector<std::size_t> starts(lengths.size());
    std::size_t acc = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        starts[i] = acc;
        acc += lengths[i];
    }
    if (acc != T) throw InvariantError("chunk lengths do not sum to the window length");
    SignalWindow out(T, w.rate());
    for (int c = 0; c < kChannels; ++c) {
        std::size_t pos = 0;
        for (std::size_t k : order) {
            for (std::size_t t = 0; t < lengths[k]; ++t) out.at(c, pos + t) = w.at(c, starts[k] + t);
            pos += lengths[k];
        }
    }
    return out;
}

SignalWindow permute_chunks(const SignalWindow& w, const TransformConfig& cfg, Rng& rng) {
    const auto lengths = draw_chunk_lengths(w.length(), cfg, rng);
    const auto order = draw_nonidentity_order(lengths.size(), rng);
    return permute_chunks(w, lengths, order);
}

namespace {

// Natural cubic spline through equally spaced knots, evaluated at 0..T-1.
std::vector<double> natural_spline(std::span<const double> y, std::size_t T) {
    const std::size_t n = y.size();
    std::vector<double> out(T);
    if (n == 1) {
        std::fill(out.begin(), out.end(), y[0]);
        return out;
    }
    const double h = static_cast<double>(T - 1) / static_cast<double>(n - 1);
    // Second derivatives M with M[0] = M[n-1] = 0; Thomas algorithm.
    std::vector<double> M(n, 0.0);
    if (n > 2) {
        const std::size_t k = n - 2;
        std::vector<double> diag(k, 4.0), rhs(k);
        for (std::size_t i = 0; i < k; ++i) rhs[i] = 6.0 * (y[i] - 2.0 * y[i + 1] + y[i + 2]) / (h * h);
        for (std::size_t i = 1; i < k; ++i) {
            const double f = 1.0 / diag[i - 1];
            diag[i] -= f;
            rhs[i] -= f * rhs[i - 1];
        }
        M[k] = rhs[k - 1] / diag[k - 1];
        for (std::size_t i = k - 1; i > 0; --i) M[i] = (rhs[i - 1] - M[i + 1]) / diag[i - 1];
    }
    for (std::size_t t = 0; t < T; ++t) {
        const double x = static_cast<double>(t);
        auto seg = std::min(n - 2, static_cast<std::size_t>(x / h));
        const double a = (static_cast<double>(seg + 1) * h - x) / h;
        const double b = 1.0 - a;
        out[t] = a * y[seg] + b * y[seg + 1] +
                 ((a * a * a - a) * M[seg] + (b * b * b - b) * M[seg + 1]) * h * h / 6.0;
    }
    return out;
}

} // namespace

std::vector<double> warp_path(std::span<const double> anchor_speeds, std::size_t T) {
    if (anchor_speeds.size() < 2) throw ConfigError("warp needs at least two anchor speeds");
    if (T < 2) throw ConfigError("warp needs a window of at least 2 samples");
    auto speed = natural_spline(anchor_speeds, T);
    for (auto& s : speed) s = std::clamp(s, kMinSpeed, kMaxSpeed);
    std::vector<double> path(T);
    path[0] = 0.0;
    for (std::size_t t = 1; t < T; ++t) path[t] = path[t - 1] + 0.5 * (speed[t - 1] + speed[t]);
    const double scale = static_cast<double>(T - 1) / path[T - 1];
    for (auto& p : path) p *= scale;
    path[T - 1] = static_cast<double>(T - 1);
    return path;
}

SignalWindow apply_warp(const SignalWindow& w, std::span<const double> path) {
    const std::size_t T = w.length();
    if (path.size() != T) throw InvariantError("warp path length differs from window length");
    SignalWindow out(T, w.rate());
    for (std::size_t t = 0; t < T; ++t) {
        const double p = std::clamp(path[t], 0.0, static_cast<double>(T - 1));
        auto j = static_cast<std::size_t>(p);
        if (j >= T - 1) j = T - 2;
        const double f = p - static_cast<double>(j);
        for (int c = 0; c < kChannels; ++c) {
            const double a = w.at(c, j), b = w.at(c, j + 1);
            out.at(c, t) = f == 0.0 ? a : (f == 1.0 ? b : a + f * (b - a));
        }
    }
    return out;
}

std::vector<double> draw_warp_speeds(const TransformConfig& cfg, Rng& rng) {
    std::vector<double> speeds(static_cast<std::size_t>(cfg.tw_knots) + 2);
    for (auto& s : speeds) s = std::clamp(rng.normal(1.0, cfg.tw_sigma), kMinSpeed, kMaxSpeed);
    return speeds;
}

SignalWindow time_warp(const SignalWindow& w, const TransformConfig& cfg, Rng& rng) {
    cfg.validate(w.length());
    const auto speeds = draw_warp_speeds(cfg, rng);
    return apply_warp(w, warp_path(speeds, w.length()));
}

Matrix3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Matrix3 multiply(const Matrix3& a, const Matrix3& b) {
    Matrix3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
    return r;
}

Matrix3 transpose(const Matrix3& a) {
    Matrix3 r{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r[i][j] = a[j][i];
    return r;
}

double determinant(const Matrix3& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

Matrix3 draw_rotation(Rng& rng) {
    std::array<int, 3> perm{0, 1, 2};
    for (int i = 2; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    Matrix3 P{};
    for (int i = 0; i < 3; ++i) P[i][perm[i]] = 1.0;

    Matrix3 S{};
    for (int i = 0; i < 3; ++i) S[i][i] = (rng.next_u32() & 1u) ? -1.0 : 1.0;

    // Axis uniform on the sphere: z uniform in [-1, 1], azimuth uniform.
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double ux = r * std::cos(phi), uy = r * std::sin(phi), uz = z;
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double c = std::cos(theta), s = std::sin(theta), C = 1.0 - c;
    const Matrix3 Q{{{c + ux * ux * C, ux * uy * C - uz * s, ux * uz * C + uy * s},
                     {uy * ux * C + uz * s, c + uy * uy * C, uy * uz * C - ux * s},
                     {uz * ux * C - uy * s, uz * uy * C + ux * s, c + uz * uz * C}}};
    return multiply(P, multiply(S, Q));
}

SignalWindow rotate(const SignalWindow& w, const Matrix3& R) {
    const std::size_t T = w.length();
    SignalWindow out(T, w.rate());
    for (std::size_t t = 0; t < T; ++t) {
        const double v[3] = {w.at(0, t), w.at(1, t), w.at(2, t)};
        for (int i = 0; i < 3; ++i) out.at(i, t) = R[i][0] * v[0] + R[i][1] * v[1] + R[i][2] * v[2];
    }
    return out;
}

SignalWindow random_rotation(const SignalWindow& w, Rng& rng) { return rotate(w, draw_rotation(rng)); }

PretextSample apply_pretext(const SignalWindow& w, const TransformConfig& cfg, Rng& rng) {
    cfg.validate(w.length());
    PretextSample out{w, {}};
    out.label.permutation_applied = rng.uniform() < cfg.apply_prob;
    out.label.tw_applied = rng.uniform() < cfg.apply_prob;
    out.label.aot_applied = rng.uniform() < cfg.apply_prob;
    if (out.label.permutation_applied) out.window = permute_chunks(out.window, cfg, rng);
    if (out.label.tw_applied) out.window = time_warp(out.window, cfg, rng);
    if (out.label.aot_applied) out.window = reverse_time(out.window);
    return out;
}

} // namespace har
