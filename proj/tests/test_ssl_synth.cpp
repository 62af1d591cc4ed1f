#include "har/error.hpp"
#include "har/ssl.hpp"
#include "har/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <map>

using namespace har;

TEST_CASE("synthetic generator audit") {
    auto spec = SynthSpec::standard();
    spec.n_subjects = 4;
    spec.windows_per_day = 100;
    spec.static_fraction = 0.85;
    const auto a = generate_synthetic(spec);
    std::size_t quiet = 0;
    for (const auto& m : a.metas()) quiet += m.intensity < 0.01f;
    const double frac = static_cast<double>(quiet) / static_cast<double>(a.size());
    CHECK(frac >= 0.83);
    CHECK(frac <= 0.87);
    const auto b = generate_synthetic(spec);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.window(i) == b.window(i));

    auto sym = SynthSpec::standard();
    for (auto& c : sym.classes) c.sawtooth_amp = 0.0;
    CHECK_THROWS_WITH_AS(sym.validate(), doctest::Contains("time-symmetric"), ConfigError);
    auto bad = SynthSpec::standard();
    bad.static_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("weighted sampling follows intensity with a floor") {
    const auto store = testing::small_store(1, 1, 40, false, 5, 0.5);
    std::vector<std::size_t> cand(store.size());
    for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = i;
    SamplerConfig cfg;
    Rng r(6);
    const auto picks = weighted_sample(store, cand, 20000, cfg, r);
    double total = 0.0;
    for (auto i : cand) total += std::max<double>(store.meta(i).intensity, cfg.intensity_floor);
    std::map<std::size_t, int> counts;
    for (auto p : picks) ++counts[p];
    for (auto i : cand) {
        const double expect = std::max<double>(store.meta(i).intensity, cfg.intensity_floor) / total;
        CHECK(std::abs(counts[i] / 20000.0 - expect) < 0.02);
    }
    cfg.weighted = false;
    const auto uni = weighted_sample(store, cand, 20000, cfg, r);
    std::size_t quiet = 0;
    for (auto p : uni) quiet += store.meta(p).intensity < 0.01f;
    CHECK(std::abs(quiet / 20000.0 - 0.5) < 0.02);
}

TEST_CASE("pretext batches are balanced and traceable") {
    const auto store = testing::small_store(6, 2, 30, false);
    SamplerConfig cfg;
    cfg.subjects_per_iter = 3;
    cfg.windows_per_subject = 200;
    Rng r(7);
    const auto batch = build_pretext_batch(store, cfg, {}, r);
    REQUIRE(batch.size() == 600);
    int pos[3] = {0, 0, 0};
    for (const auto& l : batch.labels) {
        pos[0] += l.aot_applied;
        pos[1] += l.permutation_applied;
        pos[2] += l.tw_applied;
    }
    for (int p : pos) {
        CHECK(p >= 0.40 * 600);
        CHECK(p <= 0.60 * 600);
    }
    for (const auto& src : batch.provenance) CHECK(store.meta(src.index).subject_id == src.subject_id);
    Rng r2(7);
    const auto again = build_pretext_batch(store, cfg, {}, r2);
    CHECK(again.windows == batch.windows);
    const auto hl = batch.head_labels();
    CHECK(hl[0].size() == 600);
    CHECK(hl[3].empty());
}

TEST_CASE("pretraining: zero epochs and short deterministic runs") {
    const auto store = testing::small_store(5, 1, 24, false);
    PretrainConfig cfg;
    cfg.sampler.subjects_per_iter = 2;
    cfg.sampler.windows_per_subject = 8;
    cfg.epochs = 0;
    const auto none = pretrain(store, cfg, 1);
    CHECK(none.history.empty());
    cfg.epochs = 2;
    const auto a = pretrain(store, cfg, 11);
    const auto b = pretrain(store, cfg, 11);
    CHECK(a.history.size() == 2u * 3u * 2u);
    CHECK(a.test_subjects.size() == 1);
    for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].accuracy == b.history[i].accuracy);
    for (std::size_t i = 0; i < a.checkpoint.net.params().size(); ++i)
        CHECK(a.checkpoint.net.params()[i].value == b.checkpoint.net.params()[i].value);
    std::vector<HistoryRow> rows{{0, "aot", "test", 0.5, 0, 0}, {1, "aot", "test", 0.7, 0, 0}, {2, "aot", "test", 0.9, 0, 0}};
    CHECK(accuracy_auc(rows, "aot", "test") == doctest::Approx(0.7));
}
