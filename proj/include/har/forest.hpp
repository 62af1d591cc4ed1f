#pragma once

#include "har/features.hpp"
#include "har/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace har {

struct ForestConfig {
    int n_trees = 100;
    int max_features = 5; // ceil(sqrt(20))
    int min_leaf = 1;
    bool bootstrap = true;
};

/// Flat CART tree. Leaves carry a class histogram; internal nodes a
/// (feature, threshold) split sending x[feature] <= threshold left.
struct DecisionTree {
    struct Node {
        int feature = -1; // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::vector<std::uint32_t> histogram; // leaves only
    };
    std::vector<Node> nodes;

    /// Majority class of the reached leaf (ties to the smaller class id).
    int predict(std::span<const double> x) const;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    int n_classes = 0;
    int feature_count = static_cast<int>(kFeatureCount);
    /// Out-of-bag sample indices per tree (empty without bootstrap).
    std::vector<std::vector<std::uint32_t>> out_of_bag;
};

/// Feature matrix as rows of `width` doubles.
struct FeatureMatrix {
    std::vector<double> values;
    std::size_t width = kFeatureCount;

    std::size_t rows() const noexcept { return width ? values.size() / width : 0; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * width, width}; }

    static FeatureMatrix from(std::span<const FeatureVector> rows);
};

/// Bootstrap CART trees with Gini splits over random candidate features.
/// Each tree draws from its own RNG stream (rng.split(tree index)).
ForestModel train_forest(const FeatureMatrix& X, std::span<const int> y, const ForestConfig& cfg,
                         const Rng& rng);

/// Majority vote over trees; ties resolve to the smallest class id.
std::vector<int> forest_predict(const ForestModel& m, const FeatureMatrix& X);

/// Accuracy of out-of-bag votes over samples with at least one OOB tree.
double out_of_bag_accuracy(const ForestModel& m, const FeatureMatrix& X, std::span<const int> y);

} // namespace har
