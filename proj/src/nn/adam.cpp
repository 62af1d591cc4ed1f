#include "har/nn/adam.hpp"

#include "har/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace har::nn {

template <class T>
void AdamState<T>::resize_for(const ParamSet<T>& params) {
    m.resize(params.size());
    v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (m[i].size() != params[i].size()) m[i].assign(params[i].size(), T(0));
        if (v[i].size() != params[i].size()) v[i].assign(params[i].size(), T(0));
    }
}

template <class T>
void adam_step(ParamSet<T>& params, AdamState<T>& state, const AdamConfig& cfg) {
    for (const auto& p : params) {
        if (!p.trainable || !p.has_grad) continue;
        for (T g : p.grad)
            if (!std::isfinite(static_cast<double>(g)))
                throw InvariantError(fmt::format("non-finite gradient in {}", p.name));
    }
    state.resize_for(params);
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.trainable || !p.has_grad) continue;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double g = p.grad[j];
            const double mj = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
            const double vj = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double update = cfg.lr * (mj / c1) / (std::sqrt(vj / c2) + cfg.eps);
            p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - update);
        }
    }
}

double lr_schedule(double epoch, double base_lr, int batch, int ref_batch, double burn_in) {
    const double target = base_lr * static_cast<double>(batch) / static_cast<double>(ref_batch);
    if (burn_in <= 0.0 || epoch >= burn_in) return target;
    const double f = std::max(epoch, 0.0) / burn_in;
    return base_lr + (target - base_lr) * f;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParamSet<float>&, AdamState<float>&, const AdamConfig&);
template void adam_step<double>(ParamSet<double>&, AdamState<double>&, const AdamConfig&);

} // namespace har::nn
