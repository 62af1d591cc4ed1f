#include "har/error.hpp"
#include "har/explain/attribution.hpp"
#include "har/explain/cwt.hpp"
#include "har/explain/graph.hpp"
#include "har/explain/masking.hpp"
#include "har/transforms.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace har;
using namespace har::explain;

namespace {

nn::Network<float> tiny_net(std::uint64_t seed) {
    Rng r(seed);
    auto net = nn::Network<float>::build(nn::NetConfig::tiny(), r);
    net.attach_downstream(4, r);
    return net;
}

double logit(const EvalGraph& g, const std::vector<double>& x, nn::Head h, int cls) {
    return g.forward(x)[g.head_node(h)][cls];
}

std::vector<double> fd_gradient(const EvalGraph& g, const std::vector<double>& x, nn::Head h, int cls) {
    std::vector<double> grad(x.size());
    auto p = x;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double e = 1e-5;
        p[j] = x[j] + e;
        const double up = logit(g, p, h, cls);
        p[j] = x[j] - e;
        const double dn = logit(g, p, h, cls);
        p[j] = x[j];
        grad[j] = (up - dn) / (2 * e);
    }
    return grad;
}

} // namespace

TEST_CASE("morlet scalogram") {
    constexpr double rate = kCanonicalRate;
    std::vector<double> tone(300);
    for (std::size_t t = 0; t < tone.size(); ++t) tone[t] = std::sin(2 * std::numbers::pi * 2.0 * t / rate);
    const auto s = cwt_morlet(tone, rate, 40);
    REQUIRE(s.magnitudes.size() == 40);
    CHECK(s.frequencies_hz.front() == doctest::Approx(rate / 2));
    CHECK(s.frequencies_hz.back() == doctest::Approx(0.5));
    for (std::size_t i = 1; i < s.frequencies_hz.size(); ++i) CHECK(s.frequencies_hz[i] < s.frequencies_hz[i - 1]);
    // Peak row at mid-window lies at the tone frequency, magnitude near 1.
    std::size_t best = 0;
    for (std::size_t r = 0; r < 40; ++r)
        if (s.magnitudes[r][150] > s.magnitudes[best][150]) best = r;
    CHECK(std::abs(s.frequencies_hz[best] - 2.0) < 0.2);
    CHECK(s.magnitudes[best][150] == doctest::Approx(1.0).epsilon(0.05));

    const auto z = cwt_morlet(std::vector<double>(300, 0.0), rate, 10);
    for (const auto& row : z.magnitudes)
        for (double v : row) CHECK(v == 0.0);

    auto scaled = tone;
    for (auto& v : scaled) v *= 3.0;
    const auto s3 = cwt_morlet(scaled, rate, 40);
    for (std::size_t r = 0; r < 40; r += 7)
        for (std::size_t t = 0; t < 300; t += 31) CHECK(s3.magnitudes[r][t] == doctest::Approx(3 * s.magnitudes[r][t]));
    CHECK_THROWS_AS(cwt_morlet(tone, rate, 0), ConfigError);
}

TEST_CASE("eval graph matches the network in eval mode") {
    auto net = tiny_net(1).cast<double>();
    Rng r(2);
    const auto w = testing::random_window(r);
    const auto g = EvalGraph::from(net);
    const SignalWindow ws[] = {w};
    const nn::Head heads[] = {nn::Head::aot, nn::Head::downstream};
    const auto out = net.forward(nn::pack_windows<double>(ws), nn::Mode::eval, heads);
    const auto acts = g.forward(w);
    for (auto h : heads)
        for (std::size_t c = 0; c < out.logits[static_cast<int>(h)].size(); ++c)
            CHECK(acts[g.head_node(h)][c] == doctest::Approx(out.logits[static_cast<int>(h)][c]).epsilon(1e-9));
}

TEST_CASE("gradient methods agree with finite differences") {
    const auto g = EvalGraph::from(tiny_net(3));
    Rng r(4);
    const auto w = testing::random_window(r, kCanonicalLength, 0.5);
    const auto fd = fd_gradient(g, w.samples(), nn::Head::aot, 1);
    const auto an = input_gradient(g, w.samples(), nn::Head::aot, 1, false);
    double worst = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < fd.size(); ++j) {
        worst = std::max(worst, std::abs(fd[j] - an[j]));
        scale = std::max(scale, std::abs(fd[j]));
    }
    CHECK(worst / scale < 1e-4);
    const auto sal = saliency(g, w, nn::Head::aot, 1);
    for (std::size_t j = 0; j < an.size(); ++j) CHECK(sal.scores[j] == std::abs(an[j]));
    const auto gbp = guided_backprop(g, w, nn::Head::aot, 1);
    CHECK(gbp.scores == input_gradient(g, w.samples(), nn::Head::aot, 1, true));
}

TEST_CASE("integrated gradients completeness") {
    const auto g = EvalGraph::from(tiny_net(5));
    Rng r(6);
    const auto w = testing::random_window(r, kCanonicalLength, 0.5);
    const auto ig = integrated_gradients(g, w, nn::Head::downstream, 2, 256);
    const double delta = logit(g, w.samples(), nn::Head::downstream, 2) -
                         logit(g, std::vector<double>(w.samples().size(), 0.0), nn::Head::downstream, 2);
    CHECK(std::abs(ig.sum() - delta) <= 0.01 * std::abs(delta));
}

TEST_CASE("lrp-0 on a bias-free network equals gradient times input") {
    auto g = EvalGraph::from(tiny_net(7));
    g.zero_biases();
    Rng r(8);
    const auto w = testing::random_window(r);
    const auto map = lrp(g, w, nn::Head::aot, 0, Method::lrp0);
    const auto grad = input_gradient(g, w.samples(), nn::Head::aot, 0, false);
    double worst = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < grad.size(); ++j) {
        worst = std::max(worst, std::abs(map.scores[j] - grad[j] * w.samples()[j]));
        scale = std::max(scale, std::abs(map.scores[j]));
    }
    CHECK(worst / scale < 1e-6);
    // Conservation at every cut node.
    REQUIRE(map.layer_sums.size() >= 3);
    CHECK(map.layer_sums.back().first == "input");
    for (const auto& [name, s] : map.layer_sums) {
        INFO(name);
        CHECK(std::abs(s - map.output) <= 1e-4 * std::max(1.0, std::abs(map.output)));
    }
}

TEST_CASE("lrp-epsilon limits on a bias-free network") {
    auto g = EvalGraph::from(tiny_net(9));
    g.zero_biases();
    Rng r(10);
    const auto w = testing::random_window(r);
    const auto ref = lrp(g, w, nn::Head::aot, 1, Method::lrp0);
    LrpConfig cfg;
    cfg.uniform_epsilon = 1e-12;
    const auto small = lrp(g, w, nn::Head::aot, 1, Method::lrp_eps, cfg);
    REQUIRE(small.layer_sums.size() == ref.layer_sums.size());
    for (std::size_t i = 0; i < ref.layer_sums.size(); ++i)
        CHECK(small.layer_sums[i].second == doctest::Approx(ref.layer_sums[i].second).epsilon(1e-6));
    // Every neuron keeps z / (z + eps) of its relevance, so a huge epsilon
    // absorbs nearly all of it.
    cfg.uniform_epsilon = 1e6;
    const auto big = lrp(g, w, nn::Head::aot, 1, Method::lrp_eps, cfg);
    CHECK(std::abs(big.sum()) < 1e-3 * std::abs(big.output));
}

TEST_CASE("lrp-epsilon absorbs relevance when it keeps one sign") {
    // Nonnegative weights and inputs without biases: every contribution is
    // nonnegative, so each layer keeps z / (z + eps) <= 1 of its relevance.
    auto g = EvalGraph::from(tiny_net(15));
    g.zero_biases();
    // Rows are rescaled to unit sum so activations stay of order one.
    for (auto& n : g.nodes()) {
        if (n.w.empty()) continue;
        const std::size_t fan = n.w.size() / n.C;
        for (std::size_t o = 0; o < n.C; ++o) {
            double sum = 0.0;
            for (std::size_t j = 0; j < fan; ++j) sum += std::abs(n.w[o * fan + j]);
            for (std::size_t j = 0; j < fan; ++j) n.w[o * fan + j] = std::abs(n.w[o * fan + j]) / sum;
        }
    }
    Rng r(16);
    auto w = testing::random_window(r);
    for (auto& v : w.samples()) v = std::abs(v);
    for (auto m : {Method::lrp_eps, Method::lrp_cmp}) {
        const auto map = lrp(g, w, nn::Head::aot, 1, m);
        for (std::size_t i = 1; i < map.layer_sums.size(); ++i) {
            INFO(method_name(m), " ", map.layer_sums[i].first);
            CHECK(std::abs(map.layer_sums[i].second) <= std::abs(map.layer_sums[i - 1].second) + 1e-6);
        }
    }
}

TEST_CASE("zero input gives zero relevance") {
    const auto g = EvalGraph::from(tiny_net(11));
    const SignalWindow z(kCanonicalLength, kCanonicalRate);
    for (auto m : {Method::lrp0, Method::lrp_eps, Method::lrp_cmp, Method::ig}) {
        const auto map = attribute(g, z, nn::Head::aot, 0, m);
        for (double v : map.scores) CHECK(v == 0.0);
    }
}

TEST_CASE("method and order names roundtrip") {
    for (auto m : {Method::lrp0, Method::lrp_eps, Method::lrp_cmp, Method::saliency, Method::gbp, Method::ig})
        CHECK(parse_method(method_name(m)) == m);
    CHECK_THROWS_AS(parse_method("lrp-zero"), ConfigError);
    for (auto o : {MaskOrder::relevance, MaskOrder::random, MaskOrder::temporal_forward, MaskOrder::temporal_reverse,
                   MaskOrder::temporal})
        CHECK(parse_mask_order(mask_order_name(o)) == o);
    LrpConfig bad;
    bad.gamma = -1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("masking helpers") {
    const std::vector<double> rel{0.1, 0.5, -1.0, 0.5, 0.2};
    CHECK(relevance_order(rel) == std::vector<std::size_t>{1, 3, 4, 0, 2});
    const std::vector<double> x{0.0, 0.5, 1.0}, y{1.0, 0.5, 0.5};
    CHECK(trapezoid_auc(x, y) == doctest::Approx(0.625));

    auto net = tiny_net(12);
    Rng r(13);
    AotEvalSet set;
    for (int i = 0; i < 6; ++i) {
        auto w = testing::random_window(r);
        set.windows.push_back(w);
        set.labels.push_back(0);
        set.windows.push_back(reverse_time(w));
        set.labels.push_back(1);
    }
    const double base = aot_accuracy(net, set.windows, set.labels);
    const Rng noise(14);
    const auto rel_curve = mask_faithfulness(net, set, Method::lrp_cmp, MaskOrder::relevance, noise);
    const auto rnd_curve = mask_faithfulness(net, set, Method::lrp_cmp, MaskOrder::random, noise);
    REQUIRE(rel_curve.fractions.size() == 21);
    CHECK(rel_curve.fractions.back() == 1.0);
    CHECK(rel_curve.accuracy.front() == base);
    CHECK(rnd_curve.accuracy.front() == base);
    // Fully masked windows share the same noise whatever the order.
    CHECK(rel_curve.accuracy.back() == rnd_curve.accuracy.back());
    const auto again = mask_faithfulness(net, set, Method::lrp_cmp, MaskOrder::random, noise);
    CHECK(again.accuracy == rnd_curve.accuracy);
    CHECK_THROWS_AS(build_aot_eval_set(net, set.windows), InvariantError);
}
