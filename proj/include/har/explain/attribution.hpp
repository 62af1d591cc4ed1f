#pragma once

#include "har/explain/graph.hpp"
#include "har/signal.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace har::explain {

enum class Method { lrp0, lrp_eps, lrp_cmp, saliency, gbp, ig };
std::string_view method_name(Method m);
Method parse_method(std::string_view s);

struct LrpConfig {
    double gamma = 0.25;
    /// epsilon for the middle stages, shallow to deep; the last one is also
    /// used for the final conv.
    std::array<double, 3> epsilon{1e-9, 1e-3, 10.0};
    /// epsilon of the uniform LRP-eps method.
    double uniform_epsilon = 1e-3;
    int ig_steps = 256;

    void validate() const;
};

struct RelevanceMap {
    std::vector<double> scores; // C x T, channel-major
    std::size_t C = 0, T = 0;
    nn::Head head = nn::Head::aot;
    int cls = 0;
    Method method = Method::lrp0;
    double output = 0.0; // explained logit f(x)
    /// LRP only: relevance sum at every node all paths pass through, output
    /// first, ending with ("input", sum of scores).
    std::vector<std::pair<std::string, double>> layer_sums;

    double at(std::size_t c, std::size_t t) const { return scores[c * T + t]; }
    double sum() const;
    /// Channel sum per timestep.
    std::vector<double> per_timestep() const;
};

RelevanceMap lrp(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, Method rule,
                 const LrpConfig& cfg = {});
RelevanceMap saliency(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls);
RelevanceMap guided_backprop(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls);
/// Midpoint Riemann sum of the gradient along the straight path from a
/// zero baseline.
RelevanceMap integrated_gradients(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, int steps);

RelevanceMap attribute(const EvalGraph& g, const SignalWindow& x, nn::Head head, int cls, Method m,
                       const LrpConfig& cfg = {});

/// d logit / d input of the graph (plain ReLU gradient, or guided).
std::vector<double> input_gradient(const EvalGraph& g, const std::vector<double>& x, nn::Head head, int cls,
                                   bool guided);

} // namespace har::explain
