#include "har/error.hpp"
#include "har/nn/adam.hpp"
#include "har/nn/checkpoint.hpp"
#include "har/nn/gradcheck.hpp"
#include "har/nn/network.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace har;
using namespace har::nn;

namespace {

std::vector<SignalWindow> windows(Rng& r, int n) {
    std::vector<SignalWindow> w;
    for (int i = 0; i < n; ++i) w.push_back(testing::random_window(r, 300, 0.5));
    return w;
}

} // namespace

TEST_CASE("parameter counts") {
    const auto full = Network<float>::parameter_count(NetConfig::full());
    CHECK(full >= 9'000'000);
    CHECK(full <= 11'000'000);
    Rng r(1);
    auto tiny = Network<float>::build(NetConfig::tiny(), r);
    tiny.attach_downstream(4, r);
    // The downstream output layer is excluded from the reported count.
    const std::size_t out_layer = 4 * NetConfig::tiny().head_hidden + 4;
    CHECK(tiny.params().trainable_scalars() - out_layer == Network<float>::parameter_count(NetConfig::tiny()));
}

TEST_CASE("invalid configs are rejected") {
    auto c = NetConfig::tiny();
    c.n_stages = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = NetConfig::tiny();
    c.kernel_size = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward shapes and float/double agreement") {
    Rng r(2);
    auto net = Network<float>::build(NetConfig::tiny(), r);
    net.attach_downstream(3, r);
    const auto ws = windows(r, 5);
    const std::array heads{Head::aot, Head::permutation, Head::time_warp, Head::downstream};
    const auto out = net.forward(pack_windows<float>(ws), Mode::eval, heads);
    CHECK(out.features.size() == 5 * static_cast<std::size_t>(NetConfig::tiny().feature_dim));
    CHECK(out.logits[0].size() == 10);
    CHECK(out.logits[3].size() == 15);
    auto dnet = net.cast<double>();
    const auto dout = dnet.forward(pack_windows<double>(ws), Mode::eval, heads);
    for (int h = 0; h < kHeadCount; ++h)
        for (std::size_t i = 0; i < out.logits[h].size(); ++i)
            CHECK(out.logits[h][i] == doctest::Approx(dout.logits[h][i]).epsilon(1e-3).scale(1.0));
    const auto probs = softmax_rows<float>(out.logits[3], 3);
    for (int n = 0; n < 5; ++n) CHECK(probs[n * 3] + probs[n * 3 + 1] + probs[n * 3 + 2] == doctest::Approx(1.0));
    // Eval mode is batch independent.
    const auto one = net.forward(pack_windows<float>(std::span(ws).subspan(2, 1)), Mode::eval, heads);
    for (int k = 0; k < 2; ++k) CHECK(one.logits[0][k] == doctest::Approx(out.logits[0][2 * 2 + k]).epsilon(1e-5));
}

TEST_CASE("gradient check on a tiny net") {
    auto cfg = NetConfig::tiny();
    cfg.width_base = 4;
    cfg.n_stages = 2;
    cfg.blocks_per_stage = 1;
    cfg.feature_dim = 8;
    cfg.head_hidden = 8;
    const auto rep = gradient_check(cfg, 2, 1e-6, 3, 8);
    CHECK(rep.coordinates > 0);
    CHECK(rep.overall < 1e-4);
}

TEST_CASE("gradient check catches a corrupted gradient") {
    auto cfg = NetConfig::tiny();
    cfg.width_base = 4;
    cfg.n_stages = 2;
    cfg.blocks_per_stage = 1;
    cfg.feature_dim = 8;
    cfg.head_hidden = 8;
    const auto rep = gradient_check(cfg, 2, 1e-6, 3, 8, [](ParamSet<double>& p) {
        for (auto& x : p[0].grad) x *= 1.01;
    });
    CHECK(rep.overall > 1e-3);
    CHECK(rep.worst() == "stem.conv.w");
}

TEST_CASE("adam step and learning-rate schedule") {
    ParamSet<double> ps;
    ps.add("w", {2}, true);
    ps[0].value = {1.0, -1.0};
    ps[0].grad = {0.5, -2.0};
    ps[0].has_grad = true;
    AdamState<double> st;
    AdamConfig cfg;
    cfg.lr = 0.1;
    adam_step(ps, st, cfg);
    // First bias-corrected step moves each coordinate by lr * sign(g).
    CHECK(ps[0].value[0] == doctest::Approx(0.9).epsilon(1e-7));
    CHECK(ps[0].value[1] == doctest::Approx(-0.9).epsilon(1e-7));
    ps[0].grad[1] = std::nan("");
    const auto before = ps[0].value;
    CHECK_THROWS_AS(adam_step(ps, st, cfg), InvariantError);
    CHECK(ps[0].value == before);
    CHECK(st.step == 1);

    CHECK(lr_schedule(0.0, 1e-3, 256) == 1e-3);
    CHECK(lr_schedule(17.0, 1e-3, 256) == 1e-3);
    CHECK(lr_schedule(5.0, 1e-3, 6000) == doctest::Approx(1e-3 * 6000 / 256));
    CHECK(lr_schedule(2.5, 1e-3, 6000) == doctest::Approx((1e-3 + 1e-3 * 6000 / 256) / 2).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip") {
    Rng r(4);
    Checkpoint ck;
    ck.net = Network<float>::build(NetConfig::tiny(), r);
    ck.net.attach_downstream(5, r);
    ck.adam.resize_for(ck.net.params());
    ck.adam.step = 7;
    ck.adam.m[0][0] = 0.25f;
    ck.seed = 99;
    const auto dir = testing::scratch_dir("ckpt");
    ck.save(dir / "c.bin");
    const auto back = Checkpoint::load(dir / "c.bin");
    CHECK(back.seed == 99);
    CHECK(back.adam == ck.adam);
    CHECK(back.net.downstream_classes() == 5);
    REQUIRE(back.net.params().size() == ck.net.params().size());
    for (std::size_t i = 0; i < ck.net.params().size(); ++i) {
        CHECK(back.net.params()[i].name == ck.net.params()[i].name);
        CHECK(back.net.params()[i].value == ck.net.params()[i].value);
    }
    std::ofstream(dir / "junk.bin") << "nope";
    CHECK_THROWS_AS(Checkpoint::load(dir / "junk.bin"), InputError);
}

TEST_CASE("training reduces the loss on a fixed batch") {
    Rng r(5);
    auto net = Network<float>::build(NetConfig::tiny(), r);
    const auto ws = windows(r, 16);
    HeadLabels labels;
    for (int i = 0; i < 16; ++i) labels[0].push_back(i % 2);
    const auto x = pack_windows<float>(ws);
    AdamState<float> st;
    const double first = net.loss_and_grad(x, labels, true).loss;
    double last = first;
    for (int i = 0; i < 30; ++i) {
        last = net.loss_and_grad(x, labels, true).loss;
        adam_step(net.params(), st, {});
    }
    CHECK(last < 0.5 * first);
}
