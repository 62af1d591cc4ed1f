#include "har/cv.hpp"
#include "har/downstream.hpp"
#include "har/error.hpp"
#include "har/run_config.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace har;

namespace {

DownstreamConfig quick() {
    DownstreamConfig c;
    c.train.max_epochs = 3;
    c.train.batch_size = 32;
    c.forest.n_trees = 15;
    c.max_folds = 2;
    return c;
}

} // namespace

TEST_CASE("every model family runs a cross-validation") {
    const auto store = testing::small_store(5, 1, 24, true);
    const auto plan = make_cv_plan(store, 4);
    REQUIRE(plan.mode == CvMode::loso);
    Rng r(1);
    const auto pre = nn::Network<float>::build(nn::NetConfig::tiny(), r);
    for (auto fam : {ModelFamily::finetune_all, ModelFamily::finetune_head, ModelFamily::scratch, ModelFamily::forest}) {
        const auto rep = cross_validate(store, plan, fam, quick(), &pre, 8);
        CHECK(rep.subjects.size() == 2);
        CHECK(rep.f1.mean >= 0.0);
        CHECK(rep.f1.mean <= 1.0);
    }
    // Four synthetic classes: chance is 0.25.
    CHECK(cross_validate(store, plan, ModelFamily::forest, quick(), nullptr, 8).f1.mean > 0.7);
    CHECK_THROWS_AS(cross_validate(store, plan, ModelFamily::finetune_all, quick(), nullptr, 8), ConfigError);
}

TEST_CASE("head-only fine-tuning leaves the trunk untouched") {
    const auto store = testing::small_store(4, 1, 16, true);
    const auto plan = make_cv_plan(store, 1);
    Rng r(2);
    const auto pre = nn::Network<float>::build(nn::NetConfig::tiny(), r);
    const auto train = select(store, plan.folds[0].train, plan);
    const auto val = select(store, plan.folds[0].val, plan);
    TrainConfig cfg;
    cfg.max_epochs = 2;
    const auto m = finetune(pre, store, train, val, static_cast<int>(plan.classes.size()), FinetuneMode::head_only, cfg, 3);
    for (std::size_t i = 0; i < pre.trunk_param_count(); ++i)
        CHECK(m.net.params()[i].value == pre.params()[i].value);
    const auto all = finetune(pre, store, train, val, static_cast<int>(plan.classes.size()), FinetuneMode::all_layers, cfg, 3);
    bool moved = false;
    for (std::size_t i = 0; i < pre.trunk_param_count(); ++i) moved |= all.net.params()[i].value != pre.params()[i].value;
    CHECK(moved);
}

TEST_CASE("eval csv layout") {
    EvalReport rep;
    rep.dataset = "d";
    rep.model = "m";
    LabelledSet test;
    test.rows = {0, 1, 2, 3};
    test.labels = {0, 1, 0, 1};
    test.subjects = {"A", "A", "B", "B"};
    const std::vector<int> pred{0, 1, 1, 1};
    rep.add_fold(0, test, pred, 2);
    rep.finalize();
    CHECK(rep.subjects[0].f1 == 1.0);
    const auto dir = testing::scratch_dir("evalcsv");
    write_eval_csv(dir / "e.csv", std::span(&rep, 1));
    std::ifstream f(dir / "e.csv");
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str().starts_with("dataset,model,fold,subject,f1,kappa\nd,m,0,A,1.000000,1.000000\n"));
    CHECK(ss.str().find("d,m,all,mean,") != std::string::npos);
}

TEST_CASE("run config parsing") {
    RunConfig rc;
    declare_pretrain(rc);
    declare_synth(rc);
    rc.assign("net.width_base = 4");
    CHECK(read_net(rc).width_base == 4);
    CHECK_THROWS_WITH_AS(rc.assign("net.widthbase=4"), doctest::Contains("unknown config key"), ConfigError);
    CHECK_THROWS_AS(rc.assign("novalue"), ConfigError);
    rc.assign("pretrain.epochs=abc");
    CHECK_THROWS_AS(read_pretrain(rc), ConfigError);
    rc.assign("pretrain.epochs=3");
    rc.assign("sampler.weighted=no");
    const auto p = read_pretrain(rc);
    CHECK(p.epochs == 3);
    CHECK_FALSE(p.sampler.weighted);
    const auto classes = SynthSpec::standard().classes;
    const auto back = parse_synth_classes(format_synth_classes(classes));
    REQUIRE(back.size() == classes.size());
    CHECK(back[1].name == classes[1].name);
    CHECK(back[1].harmonics == classes[1].harmonics);
    CHECK(rc.resolved().find("net.width_base = 4\n") != std::string::npos);
    const auto dir = testing::scratch_dir("rc");
    std::ofstream(dir / "c.txt") << "# comment\nsynth.n_subjects = 7\n\nbogus.key = 1\n";
    CHECK_THROWS_WITH_AS(rc.load_file(dir / "c.txt"), doctest::Contains(":4:"), ConfigError);
}
