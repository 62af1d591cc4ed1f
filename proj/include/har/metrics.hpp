#pragma once

#include <span>
#include <vector>

namespace har {

/// counts[t][p]: number of samples with true class t predicted as p.
using Confusion = std::vector<std::vector<long>>;

Confusion confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);

/// Unweighted mean of per-class F1 over classes present in y_true or
/// y_pred; a class with P + R == 0 scores 0.
double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes);
double macro_f1(const Confusion& cm);

/// (p_o - p_e) / (1 - p_e); 0 when p_e == 1.
double cohen_kappa(std::span<const int> y_true, std::span<const int> y_pred);
double cohen_kappa(const Confusion& cm);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0; // population
};
MeanSd mean_sd(std::span<const double> values);

} // namespace har
