#include "har/cv.hpp"

#include "har/error.hpp"
#include "har/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace har {

int CvPlan::remap(int original) const {
    auto it = std::lower_bound(classes.begin(), classes.end(), original);
    return it != classes.end() && *it == original ? static_cast<int>(it - classes.begin()) : -1;
}

SubjectClasses subject_classes(const WindowStore& labelled) {
    if (!labelled.labelled()) throw InputError("cross-validation needs a labelled store");
    SubjectClasses out;
    for (const auto& m : labelled.metas()) out[m.subject_id].insert(m.label);
    return out;
}

namespace {

template <class V>
void shuffle(V& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

Fold split_remaining(std::vector<std::string> test, std::vector<std::string> rest, Rng& rng) {
    Fold f;
    shuffle(rest, rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(static_cast<double>(rest.size()) / 8.0));
    if (n_val == 0 && rest.size() >= 2) n_val = 1;
    f.val.assign(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_val));
    f.train.assign(rest.begin() + static_cast<std::ptrdiff_t>(n_val), rest.end());
    f.test = std::move(test);
    std::sort(f.train.begin(), f.train.end());
    std::sort(f.val.begin(), f.val.end());
    std::sort(f.test.begin(), f.test.end());
    return f;
}

} // namespace

CvPlan make_cv_plan(const SubjectClasses& dataset, std::uint64_t seed) {
    if (dataset.size() < 2) throw InputError("cross-validation needs at least 2 subjects");
    CvPlan plan;
    std::vector<std::string> subjects;
    for (const auto& [s, c] : dataset) subjects.push_back(s);
    const Rng root(seed, 0xC5);

    if (static_cast<int>(subjects.size()) < CvPlan::kLosoThreshold) {
        plan.mode = CvMode::loso;
        std::set<int> common = dataset.begin()->second;
        for (const auto& [s, c] : dataset) {
            std::set<int> keep;
            std::set_intersection(common.begin(), common.end(), c.begin(), c.end(), std::inserter(keep, keep.end()));
            common = std::move(keep);
        }
        plan.classes.assign(common.begin(), common.end());
        for (std::size_t i = 0; i < subjects.size(); ++i) {
            std::vector<std::string> rest;
            for (std::size_t j = 0; j < subjects.size(); ++j)
                if (j != i) rest.push_back(subjects[j]);
            Rng r = root.split(i);
            plan.folds.push_back(split_remaining({subjects[i]}, std::move(rest), r));
        }
    } else {
        plan.mode = CvMode::kfold;
        std::set<int> all;
        for (const auto& [s, c] : dataset) all.insert(c.begin(), c.end());
        plan.classes.assign(all.begin(), all.end());
        Rng order = root.split(0xF01D);
        shuffle(subjects, order);
        const std::size_t n = subjects.size(), k = CvPlan::kFolds;
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t lo = n * f / k, hi = n * (f + 1) / k;
            std::vector<std::string> test(subjects.begin() + static_cast<std::ptrdiff_t>(lo),
                                          subjects.begin() + static_cast<std::ptrdiff_t>(hi));
            std::vector<std::string> rest;
            for (std::size_t j = 0; j < n; ++j)
                if (j < lo || j >= hi) rest.push_back(subjects[j]);
            std::sort(rest.begin(), rest.end());
            Rng r = root.split(f);
            plan.folds.push_back(split_remaining(std::move(test), std::move(rest), r));
        }
    }
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        std::set<int> seen;
        for (const auto& s : plan.folds[f].train)
            for (int c : dataset.at(s))
                if (plan.remap(c) >= 0) seen.insert(c);
        if (seen.size() < 2)
            throw ConfigError(fmt::format("fold {} has fewer than 2 classes in its training subjects after pruning", f));
    }
    check_cv_plan(plan, dataset);
    return plan;
}

CvPlan make_cv_plan(const WindowStore& labelled, std::uint64_t seed) {
    return make_cv_plan(subject_classes(labelled), seed);
}

void check_cv_plan(const CvPlan& plan, const SubjectClasses& dataset) {
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        const auto& fold = plan.folds[f];
        std::set<std::string> seen;
        std::size_t total = 0;
        for (const auto* part : {&fold.train, &fold.val, &fold.test})
            for (const auto& s : *part) {
                ++total;
                if (!seen.insert(s).second)
                    throw InvariantError(fmt::format("fold {}: subject {} appears in two splits", f, s));
                if (!dataset.count(s)) throw InvariantError(fmt::format("fold {}: unknown subject {}", f, s));
            }
        if (total != dataset.size())
            throw InvariantError(fmt::format("fold {} covers {} of {} subjects", f, total, dataset.size()));
        if (fold.test.empty() || fold.train.empty())
            throw InvariantError(fmt::format("fold {} has an empty train or test split", f));
    }
}

} // namespace har
