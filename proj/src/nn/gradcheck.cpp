#include "har/nn/gradcheck.hpp"

#include "har/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace har::nn {

std::string GradCheckReport::worst() const {
    std::string name;
    double best = -1.0;
    for (const auto& [n, e] : per_tensor)
        if (e > best) {
            best = e;
            name = n;
        }
    return name;
}

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(ParamSet<double>& params, const std::function<double()>& loss,
                                const std::function<void()>& analytic, double eps, std::size_t coords,
                                Rng& rng, const std::function<std::uint64_t()>& pattern) {
    std::uint64_t base_pattern = 0;
    if (pattern) {
        loss();
        base_pattern = pattern();
    }
    analytic();
    std::vector<std::vector<double>> grads;
    for (const auto& p : params) grads.push_back(p.grad);

    GradCheckReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.trainable || p.size() == 0) continue;
        std::vector<std::size_t> idx(p.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (idx.size() > coords) {
            // Partial Fisher-Yates: first `coords` entries become the sample.
            for (std::size_t j = 0; j < coords; ++j) std::swap(idx[j], idx[j + rng.below(idx.size() - j)]);
            idx.resize(coords);
            std::sort(idx.begin(), idx.end());
        }
        double worst = 0.0;
        for (auto j : idx) {
            const double saved = p.value[j];
            double h = eps, numeric = 0.0;
            for (int attempt = 0; attempt <= 10; ++attempt, h /= 2.0) {
                p.value[j] = saved + h;
                const double up = loss();
                const bool up_same = !pattern || pattern() == base_pattern;
                p.value[j] = saved - h;
                const double down = loss();
                const bool down_same = !pattern || pattern() == base_pattern;
                p.value[j] = saved;
                numeric = (up - down) / (2.0 * h);
                if (up_same && down_same) break;
                if (attempt == 0) ++report.kink_retries;
            }
            worst = std::max(worst, relative_error(grads[i][j], numeric));
        }
        report.per_tensor.emplace_back(p.name, worst);
        report.overall = std::max(report.overall, worst);
        report.coordinates += idx.size();
    }
    return report;
}

GradCheckReport gradient_check(const NetConfig& cfg, std::size_t batch, double eps, std::uint64_t seed,
                               std::size_t coords, std::function<void(ParamSet<double>&)> hook) {
    if (batch < 2) throw ConfigError("gradient check needs a batch of at least 2");
    Rng rng(seed);
    Rng init = rng.split(1);
    auto net = Network<double>::build(cfg, init);
    constexpr int kDownClasses = 3;
    net.attach_downstream(kDownClasses, init);
    // Non-trivial BN affine parameters so their gradients are exercised.
    Rng jitter = rng.split(2);
    for (auto& p : net.params()) {
        const bool is_gamma = p.name.ends_with(".gamma");
        const bool is_beta = p.name.ends_with(".beta");
        if (!is_gamma && !is_beta) continue;
        for (auto& v : p.value) v = is_gamma ? jitter.uniform(0.7, 1.3) : jitter.uniform(-0.2, 0.2);
    }
    if (hook) net.set_gradient_hook(std::move(hook));
    net.set_pattern_tracking(true);

    Rng data = rng.split(3);
    Act<double> x(kChannels, batch, static_cast<std::size_t>(cfg.input_T));
    for (auto& v : x.v) v = data.normal();
    HeadLabels labels;
    for (int h = 0; h < kHeadCount; ++h) {
        const int k = net.head_classes(static_cast<Head>(h));
        for (std::size_t n = 0; n < batch; ++n) labels[h].push_back(static_cast<int>(data.below(k)));
    }
    Rng pick = rng.split(4);
    return check_gradients(
        net.params(), [&] { return net.loss(x, labels, Mode::train); },
        [&] { net.loss_and_grad(x, labels, true); }, eps, coords, pick, [&] { return net.activation_pattern(); });
}

} // namespace har::nn
