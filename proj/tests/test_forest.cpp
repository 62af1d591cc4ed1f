#include "har/error.hpp"
#include "har/forest.hpp"

#include <doctest.h>

using namespace har;

namespace {

FeatureMatrix blobs(Rng& r, std::vector<int>& y, int n) {
    FeatureMatrix X;
    X.width = 3;
    for (int i = 0; i < n; ++i) {
        const int c = i % 3;
        y.push_back(c);
        X.values.push_back(c * 5.0 + r.normal(0, 0.5));
        X.values.push_back(r.normal());
        X.values.push_back(-c * 2.0 + r.normal(0, 0.3));
    }
    return X;
}

} // namespace

TEST_CASE("forest separates well-separated blobs and is deterministic") {
    Rng r(8);
    std::vector<int> y, yt;
    const auto X = blobs(r, y, 150);
    const auto Xt = blobs(r, yt, 60);
    ForestConfig cfg;
    cfg.n_trees = 25;
    cfg.max_features = 2;
    const auto m = train_forest(X, y, cfg, Rng(3));
    const auto pred = forest_predict(m, Xt);
    int ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == yt[i];
    CHECK(ok >= 58);
    CHECK(out_of_bag_accuracy(m, X, y) > 0.95);
    CHECK(forest_predict(train_forest(X, y, cfg, Rng(3)), Xt) == pred);
}

TEST_CASE("forest input validation") {
    FeatureMatrix X;
    X.width = 1;
    X.values = {1, 2, 3};
    const std::vector<int> same{0, 0, 0};
    CHECK_THROWS_AS(train_forest(X, same, {}, Rng(1)), InputError);
    ForestConfig bad;
    bad.n_trees = 0;
    const std::vector<int> two{0, 1, 0};
    CHECK_THROWS_AS(train_forest(X, two, bad, Rng(1)), ConfigError);
}
