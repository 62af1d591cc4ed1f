#include "har/metrics.hpp"

#include "har/error.hpp"

#include <algorithm>
#include <cmath>

namespace har {

Confusion confusion_matrix(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    if (y_true.size() != y_pred.size()) throw InputError("y_true and y_pred differ in length");
    if (y_true.empty()) throw InputError("metrics need at least one sample");
    if (n_classes < 1) throw InputError("n_classes must be positive");
    Confusion cm(n_classes, std::vector<long>(n_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= n_classes || y_pred[i] < 0 || y_pred[i] >= n_classes)
            throw InputError("class id out of range");
        ++cm[y_true[i]][y_pred[i]];
    }
    return cm;
}

double macro_f1(const Confusion& cm) {
    const std::size_t k = cm.size();
    double sum = 0.0;
    int present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        long tp = cm[c][c], fn = 0, fp = 0;
        for (std::size_t j = 0; j < k; ++j) {
            if (j == c) continue;
            fn += cm[c][j];
            fp += cm[j][c];
        }
        if (tp + fn + fp == 0) continue; // absent from truth and predictions
        ++present;
        // 2PR/(P+R) == 2TP/(2TP+FP+FN), and 0 when TP == 0.
        sum += tp == 0 ? 0.0 : 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    }
    if (present == 0) throw InputError("metrics need at least one sample");
    return sum / present;
}

double macro_f1(std::span<const int> y_true, std::span<const int> y_pred, int n_classes) {
    return macro_f1(confusion_matrix(y_true, y_pred, n_classes));
}

double cohen_kappa(const Confusion& cm) {
    const std::size_t k = cm.size();
    double n = 0.0, agree = 0.0;
    std::vector<double> rows(k, 0.0), cols(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            n += static_cast<double>(cm[i][j]);
            rows[i] += static_cast<double>(cm[i][j]);
            cols[j] += static_cast<double>(cm[i][j]);
            if (i == j) agree += static_cast<double>(cm[i][j]);
        }
    if (n == 0.0) throw InputError("metrics need at least one sample");
    const double po = agree / n;
    double pe = 0.0;
    for (std::size_t i = 0; i < k; ++i) pe += (rows[i] / n) * (cols[i] / n);
    if (pe >= 1.0) return 0.0;
    return (po - pe) / (1.0 - pe);
}

double cohen_kappa(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) throw InputError("y_true and y_pred differ in length");
    if (y_true.empty()) throw InputError("metrics need at least one sample");
    int k = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) k = std::max({k, y_true[i] + 1, y_pred[i] + 1});
    return cohen_kappa(confusion_matrix(y_true, y_pred, k));
}

MeanSd mean_sd(std::span<const double> values) {
    MeanSd r;
    if (values.empty()) return r;
    for (double v : values) r.mean += v;
    r.mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.sd = std::sqrt(ss / static_cast<double>(values.size()));
    return r;
}

} // namespace har
