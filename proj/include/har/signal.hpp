#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace har {

inline constexpr int kChannels = 3;
inline constexpr int kCanonicalRate = 30;
inline constexpr int kCanonicalDurationS = 10;
inline constexpr int kCanonicalLength = kCanonicalRate * kCanonicalDurationS;

/// Fixed-length tri-axial acceleration frame in g, channel-major (a_x, a_y, a_z).
class SignalWindow {
public:
    SignalWindow() = default;
    SignalWindow(std::size_t length, int rate);
    SignalWindow(std::vector<double> samples, int rate);

    std::size_t length() const noexcept { return samples_.size() / kChannels; }
    int rate() const noexcept { return rate_; }
    double duration_s() const noexcept { return static_cast<double>(length()) / rate_; }

    double& at(int c, std::size_t t) { return samples_[c * length() + t]; }
    double at(int c, std::size_t t) const { return samples_[c * length() + t]; }

    std::span<double> channel(int c) { return {samples_.data() + c * length(), length()}; }
    std::span<const double> channel(int c) const {
        return {samples_.data() + c * length(), length()};
    }

    std::vector<double>& samples() noexcept { return samples_; }
    const std::vector<double>& samples() const noexcept { return samples_; }

    /// Throws InputError naming the first non-finite (channel, timestep).
    void validate() const;

    bool operator==(const SignalWindow&) const = default;

private:
    std::vector<double> samples_;
    int rate_ = kCanonicalRate;
};

/// Variable-length recording from one subject and day.
struct RawRecording {
    std::array<std::vector<double>, kChannels> channels;
    double rate = 0.0;
    std::string subject_id;
    int day_index = 0;

    std::size_t length() const noexcept { return channels[0].size(); }
    void validate() const;
};

/// Linear interpolation onto a uniform grid from the first to the last
/// source sample; output length round(N * target_rate / rate).
RawRecording resample_linear(const RawRecording& rec, double target_rate);

/// Consecutive non-overlapping windows; a trailing partial window is dropped.
std::vector<SignalWindow> segment_windows(const RawRecording& rec, double duration_s);

std::vector<double> euclidean_norm(const SignalWindow& w);

/// Population standard deviation of the Euclidean norm series.
double window_intensity(const SignalWindow& w);

/// Population mean / standard deviation helpers (two-pass).
double mean_of(std::span<const double> x);
double population_std(std::span<const double> x);

} // namespace har
