#pragma once

#include "har/nn/network.hpp"

#include <cstdint>
#include <vector>

namespace har::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment estimates, one buffer per parameter (index-aligned
/// with the ParamSet; grows when a head is attached).
template <class T>
struct AdamState {
    std::uint64_t step = 0;
    std::vector<std::vector<T>> m, v;

    void resize_for(const ParamSet<T>& params);
    bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update of every trainable parameter that received
/// a gradient. Throws InvariantError, leaving everything untouched, if any
/// such gradient is non-finite.
template <class T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, const AdamConfig& cfg);

/// Learning rate at (fractional) `epoch`: linear ramp from base_lr at 0 to
/// base_lr * batch / ref_batch at `burn_in`, constant after.
double lr_schedule(double epoch, double base_lr, int batch, int ref_batch = 256, double burn_in = 5.0);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

} // namespace har::nn
