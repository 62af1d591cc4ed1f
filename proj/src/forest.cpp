#include "har/forest.hpp"

#include "har/error.hpp"
#include "har/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>

namespace har {

namespace {

int argmax_histogram(const std::vector<std::uint32_t>& h) {
    int best = 0;
    for (std::size_t c = 1; c < h.size(); ++c)
        if (h[c] > h[best]) best = static_cast<int>(c);
    return best;
}

double gini(const std::vector<std::uint32_t>& counts, std::size_t n) {
    if (n == 0) return 0.0;
    double s = 0.0;
    for (auto c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(n);
        s += p * p;
    }
    return 1.0 - s;
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& X, std::span<const int> y, int n_classes, const ForestConfig& cfg,
                Rng& rng)
        : X_(X), y_(y), n_classes_(n_classes), cfg_(cfg), rng_(rng) {}

    DecisionTree build(std::vector<std::uint32_t> samples) {
        DecisionTree tree;
        struct Pending {
            int node;
            std::vector<std::uint32_t> samples;
        };
        std::vector<Pending> stack;
        tree.nodes.emplace_back();
        stack.push_back({0, std::move(samples)});
        while (!stack.empty()) {
            Pending job = std::move(stack.back());
            stack.pop_back();
            const auto counts = histogram(job.samples);
            const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
            Split split;
            if (!pure && job.samples.size() >= 2 * static_cast<std::size_t>(cfg_.min_leaf))
                split = best_split(job.samples, counts);
            if (split.feature < 0) {
                tree.nodes[job.node].histogram = counts;
                continue;
            }
            std::vector<std::uint32_t> left, right;
            for (auto s : job.samples)
                (X_.row(s)[split.feature] <= split.threshold ? left : right).push_back(s);
            const int li = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[job.node];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = li;
            node.right = li + 1;
            stack.push_back({li + 1, std::move(right)});
            stack.push_back({li, std::move(left)});
        }
        return tree;
    }

private:
    std::vector<std::uint32_t> histogram(const std::vector<std::uint32_t>& samples) const {
        std::vector<std::uint32_t> h(n_classes_, 0);
        for (auto s : samples) ++h[y_[s]];
        return h;
    }

    Split best_split(const std::vector<std::uint32_t>& samples, const std::vector<std::uint32_t>& total) {
        const std::size_t d = X_.width;
        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), std::size_t{0});
        for (std::size_t i = d - 1; i > 0; --i) std::swap(features[i], features[rng_.below(i + 1)]);

        Split best;
        best.impurity = std::numeric_limits<double>::infinity();
        int examined = 0;
        const std::size_t n = samples.size();
        const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
        std::vector<std::pair<double, int>> vals(n);
        for (std::size_t f : features) {
            if (examined >= cfg_.max_features) break;
            for (std::size_t i = 0; i < n; ++i) vals[i] = {X_.row(samples[i])[f], y_[samples[i]]};
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue; // constant here; does not count
            ++examined;
            std::vector<std::uint32_t> left(n_classes_, 0), right = total;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                ++left[vals[i].second];
                --right[vals[i].second];
                if (vals[i].first == vals[i + 1].first) continue;
                const std::size_t nl = i + 1, nr = n - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double imp = (static_cast<double>(nl) * gini(left, nl) +
                                    static_cast<double>(nr) * gini(right, nr)) /
                                   static_cast<double>(n);
                if (imp < best.impurity) {
                    best.impurity = imp;
                    best.feature = static_cast<int>(f);
                    const double a = vals[i].first, b = vals[i + 1].first;
                    double mid = a + (b - a) / 2.0;
                    if (!(mid < b)) mid = a;
                    best.threshold = mid;
                }
            }
        }
        return best;
    }

    const FeatureMatrix& X_;
    std::span<const int> y_;
    int n_classes_;
    const ForestConfig& cfg_;
    Rng& rng_;
};

} // namespace

int DecisionTree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0) i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return argmax_histogram(nodes[i].histogram);
}

FeatureMatrix FeatureMatrix::from(std::span<const FeatureVector> rows) {
    FeatureMatrix m;
    m.width = kFeatureCount;
    m.values.reserve(rows.size() * kFeatureCount);
    for (const auto& r : rows) m.values.insert(m.values.end(), r.values.begin(), r.values.end());
    return m;
}

ForestModel train_forest(const FeatureMatrix& X, std::span<const int> y, const ForestConfig& cfg,
                         const Rng& rng) {
    const std::size_t n = X.rows();
    if (n != y.size() || n < 2) throw InputError("forest training needs |X| == |y| >= 2");
    if (cfg.n_trees < 1 || cfg.max_features < 1 || cfg.min_leaf < 1)
        throw ConfigError("forest n_trees, max_features and min_leaf must be >= 1");
    std::set<int> classes;
    for (int c : y) {
        if (c < 0) throw InputError("class ids must be non-negative");
        classes.insert(c);
    }
    if (classes.size() < 2) throw InputError("forest training needs at least 2 classes");

    ForestModel model;
    model.n_classes = *classes.rbegin() + 1;
    model.feature_count = static_cast<int>(X.width);
    model.trees.resize(cfg.n_trees);
    model.out_of_bag.resize(cfg.n_trees);
    parallel_for(static_cast<std::size_t>(cfg.n_trees), [&](std::size_t t) {
        Rng tree_rng = rng.split(t);
        std::vector<std::uint32_t> samples(n);
        std::vector<char> in_bag(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            samples[i] = cfg.bootstrap ? static_cast<std::uint32_t>(tree_rng.below(n)) : static_cast<std::uint32_t>(i);
            in_bag[samples[i]] = 1;
        }
        if (cfg.bootstrap)
            for (std::size_t i = 0; i < n; ++i)
                if (!in_bag[i]) model.out_of_bag[t].push_back(static_cast<std::uint32_t>(i));
        TreeBuilder builder(X, y, model.n_classes, cfg, tree_rng);
        model.trees[t] = builder.build(std::move(samples));
    });
    return model;
}

std::vector<int> forest_predict(const ForestModel& m, const FeatureMatrix& X) {
    if (static_cast<int>(X.width) != m.feature_count)
        throw InputError(fmt::format("forest expects {} features, got {}", m.feature_count, X.width));
    std::vector<int> out(X.rows());
    std::vector<std::uint32_t> votes(m.n_classes);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        std::fill(votes.begin(), votes.end(), 0u);
        for (const auto& tree : m.trees) ++votes[tree.predict(X.row(i))];
        out[i] = argmax_histogram(votes);
    }
    return out;
}

double out_of_bag_accuracy(const ForestModel& m, const FeatureMatrix& X, std::span<const int> y) {
    std::vector<std::vector<std::uint32_t>> votes(X.rows(), std::vector<std::uint32_t>(m.n_classes, 0));
    for (std::size_t t = 0; t < m.trees.size(); ++t)
        for (auto i : m.out_of_bag[t]) ++votes[i][m.trees[t].predict(X.row(i))];
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        std::uint32_t s = 0;
        for (auto v : votes[i]) s += v;
        if (s == 0) continue;
        ++total;
        if (argmax_histogram(votes[i]) == y[i]) ++correct;
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

} // namespace har
