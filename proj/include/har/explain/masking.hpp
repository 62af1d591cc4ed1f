#pragma once

#include "har/explain/attribution.hpp"
#include "har/nn/network.hpp"
#include "har/rng.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace har::explain {

/// Arrow-of-time evaluation pairs: every source window and its reversal,
/// kept only when the model labels both correctly.
struct AotEvalSet {
    std::vector<SignalWindow> windows;
    std::vector<int> labels; // 1 = reversed
    double source_accuracy = 0.0;
};

/// Throws InvariantError when the model's pair accuracy is below 0.6, which
/// means it never learned the task and masking curves would be meaningless.
AotEvalSet build_aot_eval_set(const nn::Network<float>& net, std::span<const SignalWindow> windows,
                              std::size_t max_pairs = 0);

enum class MaskOrder { relevance, random, temporal_forward, temporal_reverse, temporal };
std::string_view mask_order_name(MaskOrder o);
MaskOrder parse_mask_order(std::string_view s);

struct MaskCurve {
    MaskOrder order = MaskOrder::relevance;
    Method method = Method::lrp_cmp;
    std::vector<double> fractions;
    std::vector<double> accuracy;
    /// Trapezoid area under accuracy vs fraction.
    double auc = 0.0;
};

/// Accuracy of `net`'s AoT head on the windows.
double aot_accuracy(nn::Network<float>& net, std::span<const SignalWindow> windows, std::span<const int> labels);

/// Cumulatively replaces timesteps (all channels jointly) with zero-mean
/// Gaussian noise whose std is the window's intensity, in the given order,
/// at fractions 0, 0.05, ..., 1. Noise is drawn once per window from `rng`
/// so every order sees the same imputation values. `method` is only used
/// for the relevance order.
MaskCurve mask_faithfulness(const nn::Network<float>& net, const AotEvalSet& set, Method method, MaskOrder order,
                            const Rng& rng, const LrpConfig& lrp = {});

/// Timestep indices, most relevant first (ties by index).
std::vector<std::size_t> relevance_order(std::span<const double> per_timestep);

double trapezoid_auc(std::span<const double> x, std::span<const double> y);

} // namespace har::explain
