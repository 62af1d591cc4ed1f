#pragma once

#include "har/nn/network.hpp"
#include "har/rng.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace har::nn {

struct GradCheckReport {
    std::vector<std::pair<std::string, double>> per_tensor; // max relative error per tensor
    double overall = 0.0;
    std::size_t coordinates = 0;
    std::size_t kink_retries = 0; // coordinates re-measured with a smaller step

    /// Name of the worst tensor, empty if none was checked.
    std::string worst() const;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-7);

/// Compares analytic gradients against central differences on every
/// trainable tensor of `params`. `analytic` fills params[i].grad; `loss`
/// evaluates the objective without side effects. Tensors with more than
/// `coords` entries are checked on `coords` distinct random coordinates.
///
/// If `pattern` is given it must return the ReLU on/off signature of the
/// last loss() call; when a +/-eps probe changes it, the difference
/// straddles a kink and the step is shrunk (down to eps / 1024) until both
/// probes stay in the same linear region.
GradCheckReport check_gradients(ParamSet<double>& params, const std::function<double()>& loss,
                                const std::function<void()>& analytic, double eps, std::size_t coords, Rng& rng,
                                const std::function<std::uint64_t()>& pattern = {});

/// Finite-difference check of the full network (trunk, pretext heads and a
/// 3-class downstream head) in 64-bit, on a random batch with all heads
/// active. `hook` can tamper with the computed gradients.
GradCheckReport gradient_check(const NetConfig& cfg, std::size_t batch, double eps, std::uint64_t seed,
                               std::size_t coords = 32,
                               std::function<void(ParamSet<double>&)> hook = {});

} // namespace har::nn
