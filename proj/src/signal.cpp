#include "har/signal.hpp"

#include "har/error.hpp"

#include <cmath>
#include <fmt/format.h>

namespace har {

SignalWindow::SignalWindow(std::size_t length, int rate)
    : samples_(length * kChannels, 0.0), rate_(rate) {}

SignalWindow::SignalWindow(std::vector<double> samples, int rate)
    : samples_(std::move(samples)), rate_(rate) {
    if (samples_.size() % kChannels != 0)
        throw InputError("window sample count is not a multiple of 3 channels");
}

void SignalWindow::validate() const {
    const std::size_t T = length();
    for (int c = 0; c < kChannels; ++c)
        for (std::size_t t = 0; t < T; ++t)
            if (!std::isfinite(at(c, t)))
                throw InputError(fmt::format("non-finite sample at channel {}, timestep {}", c, t));
}

void RawRecording::validate() const {
    if (!(rate > 0.0)) throw InputError("recording rate must be positive");
    const std::size_t N = channels[0].size();
    if (N < 2) throw InputError("recording needs at least 2 samples");
    for (int c = 0; c < kChannels; ++c) {
        if (channels[c].size() != N) throw InputError("recording channels differ in length");
        for (std::size_t t = 0; t < N; ++t)
            if (!std::isfinite(channels[c][t]))
                throw InputError(fmt::format("non-finite sample at channel {}, timestep {}", c, t));
    }
}

RawRecording resample_linear(const RawRecording& rec, double target_rate) {
    if (!(target_rate > 0.0)) throw InputError("target rate must be positive");
    rec.validate();
    if (target_rate == rec.rate) return rec;

    const std::size_t N = rec.length();
    const auto M = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(static_cast<double>(N) * target_rate / rec.rate)));

    RawRecording out;
    out.rate = target_rate;
    out.subject_id = rec.subject_id;
    out.day_index = rec.day_index;
    const double step = static_cast<double>(N - 1) / static_cast<double>(M - 1);
    for (int c = 0; c < kChannels; ++c) {
        const auto& x = rec.channels[c];
        auto& y = out.channels[c];
        y.resize(M);
        for (std::size_t i = 0; i < M; ++i) {
            const double pos = static_cast<double>(i) * step;
            auto j = static_cast<std::size_t>(pos);
            if (j >= N - 1) {
                y[i] = x[N - 1];
                continue;
            }
            const double f = pos - static_cast<double>(j);
            y[i] = x[j] + f * (x[j + 1] - x[j]);
        }
        y[M - 1] = x[N - 1];
    }
    return out;
}

std::vector<SignalWindow> segment_windows(const RawRecording& rec, double duration_s) {
    const double per_window = rec.rate * duration_s;
    const double rounded = std::round(per_window);
    if (!(duration_s > 0.0) || std::abs(per_window - rounded) > 1e-9 || rounded < 1.0)
        throw ConfigError(fmt::format("rate {} x duration {} is not a whole number of samples",
                                      rec.rate, duration_s));
    const auto W = static_cast<std::size_t>(rounded);
    const int rate = static_cast<int>(std::lround(rec.rate));
    const std::size_t count = rec.length() / W;

    std::vector<SignalWindow> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        SignalWindow w(W, rate);
        for (int c = 0; c < kChannels; ++c)
            for (std::size_t t = 0; t < W; ++t) w.at(c, t) = rec.channels[c][k * W + t];
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<double> euclidean_norm(const SignalWindow& w) {
    const std::size_t T = w.length();
    std::vector<double> out(T);
    const auto x = w.channel(0), y = w.channel(1), z = w.channel(2);
    for (std::size_t t = 0; t < T; ++t) out[t] = std::sqrt(x[t] * x[t] + y[t] * y[t] + z[t] * z[t]);
    return out;
}

double mean_of(std::span<const double> x) {
    if (x.empty()) return 0.0;
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double population_std(std::span<const double> x) {
    if (x.empty()) return 0.0;
    const double m = mean_of(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size()));
}

double window_intensity(const SignalWindow& w) {
    const auto n = euclidean_norm(w);
    return population_std(n);
}

} // namespace har
