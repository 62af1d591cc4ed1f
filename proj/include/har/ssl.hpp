#pragma once

#include "har/nn/checkpoint.hpp"
#include "har/nn/network.hpp"
#include "har/rng.hpp"
#include "har/transforms.hpp"
#include "har/window_store.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace har {

struct SamplerConfig {
    int subjects_per_iter = 4;
    int windows_per_subject = 1500;
    double intensity_floor = 1e-4;
    bool weighted = true;
    /// Usable fraction of each subject-day: a contiguous run of windows
    /// chosen uniformly once per run.
    double data_ratio = 1.0;

    void validate() const;
    int batch_size() const { return subjects_per_iter * windows_per_subject; }
};

/// Windows available to the sampler, grouped by subject then day.
class SamplingPlan {
public:
    using Days = std::map<int, std::vector<std::size_t>>;

    /// Every subject and day of `store`, no ratio restriction.
    explicit SamplingPlan(const WindowStore& store);
    /// Only `subjects`; each day restricted to a contiguous `data_ratio`
    /// fraction (at least one window) positioned with `rng`.
    SamplingPlan(const WindowStore& store, std::span<const std::string> subjects, double data_ratio, Rng& rng);

    const std::vector<std::string>& subjects() const noexcept { return subjects_; }
    const Days& days(const std::string& subject) const { return by_subject_.at(subject); }
    std::size_t total_windows() const noexcept { return total_; }

private:
    std::vector<std::string> subjects_;
    std::map<std::string, Days> by_subject_;
    std::size_t total_ = 0;
};

struct PretextBatch {
    struct Source {
        std::string subject_id;
        int day_index = 0;
        std::size_t index = 0; // row in the store
    };
    std::vector<SignalWindow> windows;
    std::vector<PretextLabel> labels;
    std::vector<Source> provenance;

    std::size_t size() const noexcept { return windows.size(); }
    nn::HeadLabels head_labels() const;
};

/// k indices from `candidates`, with replacement, with probability
/// proportional to max(intensity, floor); uniform when !cfg.weighted.
std::vector<std::size_t> weighted_sample(const WindowStore& store, std::span<const std::size_t> candidates,
                                         int k, const SamplerConfig& cfg, Rng& rng);
std::vector<std::size_t> weighted_sample(const WindowStore& store, const std::string& subject, int day, int k,
                                         const SamplerConfig& cfg, Rng& rng);

/// subjects_per_iter subjects without replacement, one uniform day each,
/// weighted_sample within the day, random rotation, then apply_pretext.
PretextBatch build_pretext_batch(const WindowStore& store, const SamplingPlan& plan, const SamplerConfig& cfg,
                                 const TransformConfig& tcfg, Rng& rng);
PretextBatch build_pretext_batch(const WindowStore& store, const SamplerConfig& cfg, const TransformConfig& tcfg,
                                 Rng& rng);

/// Fraction of rows whose argmax matches the label, per pretext head.
std::array<double, nn::kPretextHeadCount> per_task_accuracy(nn::Network<float>& net,
                                                            std::span<const PretextBatch> batches);

struct PretrainConfig {
    nn::NetConfig net = nn::NetConfig::tiny();
    SamplerConfig sampler;
    TransformConfig transforms;
    int epochs = 30;
    double base_lr = 1e-3;
    int patience = 5;
    double test_fraction = 0.2;
    /// Upper bound on held-out batches evaluated per epoch.
    int max_eval_batches = 8;

    void validate() const;
};

struct HistoryRow {
    int epoch = 0;
    std::string task;
    std::string split;
    double accuracy = 0.0;
    double loss = 0.0;
    double lr = 0.0;
};

struct PretrainResult {
    nn::Checkpoint checkpoint;
    std::vector<HistoryRow> history;
    std::vector<std::string> train_subjects, test_subjects;
    int best_epoch = -1;
    std::array<double, nn::kPretextHeadCount> best_test_accuracy{};
};

using ProgressFn = std::function<void(const std::string&)>;

/// Multi-task pre-training with a subject-level train/test split, early
/// stopping on mean held-out accuracy, and best-checkpoint selection.
PretrainResult pretrain(const WindowStore& store, const PretrainConfig& cfg, std::uint64_t seed,
                        const ProgressFn& progress = {});

std::string pretext_task_name(int head);
void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows);

/// Trapezoid area under accuracy(epoch) for one task/split, normalized by
/// the epoch span (so it lies in [0, 1]); a single point returns its value.
double accuracy_auc(std::span<const HistoryRow> rows, const std::string& task, const std::string& split);

} // namespace har
