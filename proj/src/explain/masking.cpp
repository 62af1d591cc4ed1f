#include "har/explain/masking.hpp"

#include "har/error.hpp"
#include "har/parallel.hpp"
#include "har/transforms.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace har::explain {

namespace {

constexpr double kChanceGuard = 0.6;
constexpr int kFractionSteps = 20;

std::vector<int> predict_aot(nn::Network<float>& net, std::span<const SignalWindow> windows) {
    std::vector<int> out;
    out.reserve(windows.size());
    constexpr std::size_t chunk = 256;
    const std::array heads{nn::Head::aot};
    for (std::size_t lo = 0; lo < windows.size(); lo += chunk) {
        const auto part = windows.subspan(lo, std::min(chunk, windows.size() - lo));
        const auto x = nn::pack_windows<float>(part);
        const auto fo = net.forward(x, nn::Mode::eval, heads);
        const auto& logits = fo.logits[static_cast<int>(nn::Head::aot)];
        const auto pred = nn::argmax_rows<float>(logits, 2);
        out.insert(out.end(), pred.begin(), pred.end());
    }
    return out;
}

} // namespace

AotEvalSet build_aot_eval_set(const nn::Network<float>& net, std::span<const SignalWindow> windows,
                              std::size_t max_pairs) {
    if (windows.empty()) throw InputError("masking needs at least one window");
    auto model = net;
    std::vector<SignalWindow> all;
    all.reserve(2 * windows.size());
    for (const auto& w : windows) {
        all.push_back(w);
        all.push_back(reverse_time(w));
    }
    const auto pred = predict_aot(model, all);
    AotEvalSet set;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == static_cast<int>(i % 2);
    set.source_accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
    if (set.source_accuracy < kChanceGuard)
        throw InvariantError(fmt::format("AoT accuracy {:.3f} is below {}; the model looks untrained",
                                         set.source_accuracy, kChanceGuard));
    for (std::size_t p = 0; p < windows.size(); ++p) {
        if (max_pairs && set.windows.size() / 2 >= max_pairs) break;
        if (pred[2 * p] != 0 || pred[2 * p + 1] != 1) continue;
        set.windows.push_back(all[2 * p]);
        set.labels.push_back(0);
        set.windows.push_back(all[2 * p + 1]);
        set.labels.push_back(1);
    }
    return set;
}

std::string_view mask_order_name(MaskOrder o) {
    switch (o) {
    case MaskOrder::relevance: return "relevance";
    case MaskOrder::random: return "random";
    case MaskOrder::temporal_forward: return "temporal_forward";
    case MaskOrder::temporal_reverse: return "temporal_reverse";
    case MaskOrder::temporal: return "temporal";
    }
    return "?";
}

MaskOrder parse_mask_order(std::string_view s) {
    for (auto o : {MaskOrder::relevance, MaskOrder::random, MaskOrder::temporal_forward, MaskOrder::temporal_reverse,
                   MaskOrder::temporal})
        if (mask_order_name(o) == s) return o;
    throw ConfigError(fmt::format("unknown mask order '{}'", s));
}

double aot_accuracy(nn::Network<float>& net, std::span<const SignalWindow> windows, std::span<const int> labels) {
    if (windows.size() != labels.size()) throw InputError("windows and labels differ in count");
    if (windows.empty()) return 0.0;
    const auto pred = predict_aot(net, windows);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == labels[i];
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

std::vector<std::size_t> relevance_order(std::span<const double> per_timestep) {
    std::vector<std::size_t> idx(per_timestep.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return per_timestep[a] > per_timestep[b]; });
    return idx;
}

double trapezoid_auc(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("AUC needs equal-length x and y");
    double a = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) a += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
    return a;
}

MaskCurve mask_faithfulness(const nn::Network<float>& net, const AotEvalSet& set, Method method, MaskOrder order,
                            const Rng& rng, const LrpConfig& lrp) {
    if (order == MaskOrder::temporal) {
        auto fwd = mask_faithfulness(net, set, method, MaskOrder::temporal_forward, rng, lrp);
        const auto rev = mask_faithfulness(net, set, method, MaskOrder::temporal_reverse, rng, lrp);
        for (std::size_t i = 0; i < fwd.accuracy.size(); ++i) fwd.accuracy[i] = 0.5 * (fwd.accuracy[i] + rev.accuracy[i]);
        fwd.auc = trapezoid_auc(fwd.fractions, fwd.accuracy);
        fwd.order = MaskOrder::temporal;
        return fwd;
    }
    if (set.windows.empty()) throw InputError("empty masking set");
    const std::size_t n = set.windows.size();
    const std::size_t T = set.windows.front().length();

    // Per-window noise and masking order, fixed before any masking.
    std::vector<std::vector<double>> noise(n);
    std::vector<std::vector<std::size_t>> orders(n);
    const EvalGraph graph = order == MaskOrder::relevance ? EvalGraph::from(net) : EvalGraph{};
    parallel_for(n, [&](std::size_t i) {
        const auto& w = set.windows[i];
        Rng r = rng.split(i);
        const double sd = window_intensity(w);
        noise[i].resize(w.samples().size());
        for (auto& v : noise[i]) v = sd * r.normal();
        auto& o = orders[i];
        switch (order) {
        case MaskOrder::relevance: {
            const auto map = attribute(graph, w, nn::Head::aot, set.labels[i], method, lrp);
            o = relevance_order(map.per_timestep());
            break;
        }
        case MaskOrder::random: {
            o.resize(T);
            std::iota(o.begin(), o.end(), std::size_t{0});
            Rng shuffle = r.split(1);
            for (std::size_t k = T - 1; k > 0; --k) std::swap(o[k], o[shuffle.below(k + 1)]);
            break;
        }
        case MaskOrder::temporal_forward:
            o.resize(T);
            std::iota(o.begin(), o.end(), std::size_t{0});
            break;
        case MaskOrder::temporal_reverse:
            o.resize(T);
            std::iota(o.rbegin(), o.rend(), std::size_t{0});
            break;
        case MaskOrder::temporal: break;
        }
    });

    MaskCurve curve;
    curve.order = order;
    curve.method = method;
    auto model = net;
    std::vector<SignalWindow> masked = set.windows;
    std::vector<std::size_t> done(n, 0);
    for (int s = 0; s <= kFractionSteps; ++s) {
        const double f = static_cast<double>(s) / kFractionSteps;
        const auto m = static_cast<std::size_t>(std::lround(f * static_cast<double>(T)));
        for (std::size_t i = 0; i < n; ++i) {
            for (; done[i] < m; ++done[i]) {
                const std::size_t t = orders[i][done[i]];
                for (int c = 0; c < kChannels; ++c) masked[i].at(c, t) = noise[i][c * T + t];
            }
        }
        curve.fractions.push_back(f);
        curve.accuracy.push_back(aot_accuracy(model, masked, set.labels));
    }
    curve.auc = trapezoid_auc(curve.fractions, curve.accuracy);
    return curve;
}

} // namespace har::explain
