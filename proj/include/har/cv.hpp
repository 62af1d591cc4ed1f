#pragma once

#include "har/window_store.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace har {

enum class CvMode { loso, kfold };

struct Fold {
    std::vector<std::string> train, val, test;
};

struct CvPlan {
    static constexpr int kLosoThreshold = 10;
    static constexpr int kFolds = 5;

    CvMode mode = CvMode::kfold;
    std::vector<Fold> folds;
    /// Original class ids kept after pruning, ascending; position = new id.
    std::vector<int> classes;

    /// New id of an original class, or -1 if pruned.
    int remap(int original) const;
};

/// Classes performed by each subject.
using SubjectClasses = std::map<std::string, std::set<int>>;
SubjectClasses subject_classes(const WindowStore& labelled);

/// Below 10 subjects: leave-one-subject-out, classes not performed by every
/// subject dropped. Otherwise five subject-wise folds. The subjects left
/// after the test set are split about 7:1 into train and validation.
CvPlan make_cv_plan(const SubjectClasses& dataset, std::uint64_t seed);
CvPlan make_cv_plan(const WindowStore& labelled, std::uint64_t seed);

/// Throws InvariantError unless train/val/test are pairwise disjoint within
/// every fold and each fold covers exactly the plan's subjects.
void check_cv_plan(const CvPlan& plan, const SubjectClasses& dataset);

} // namespace har
