#pragma once

#include "har/cv.hpp"
#include "har/forest.hpp"
#include "har/metrics.hpp"
#include "har/nn/network.hpp"
#include "har/window_store.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace har {

enum class FinetuneMode { all_layers, head_only };

struct TrainConfig {
    int max_epochs = 30;
    int batch_size = 64;
    double base_lr = 1e-3;
    int patience = 5;

    void validate() const;
};

/// Windows of one split with labels remapped to the plan's class ids.
struct LabelledSet {
    std::vector<std::size_t> rows; // store rows
    std::vector<int> labels;
    std::vector<std::string> subjects; // per row
};

LabelledSet select(const WindowStore& store, std::span<const std::string> subjects, const CvPlan& plan);

struct TrainedModel {
    nn::Network<float> net;
    int best_epoch = -1;
    std::vector<double> val_f1; // per epoch
};

/// Attaches a fresh FC-512 + softmax head and trains on `train`, early
/// stopping on validation macro-F1 (training-set macro-F1 when `val` is
/// empty). Head-only mode trains on frozen eval-mode trunk features and
/// never touches a trunk parameter.
TrainedModel finetune(const nn::Network<float>& pretrained, const WindowStore& store, const LabelledSet& train,
                      const LabelledSet& val, int n_classes, FinetuneMode mode, const TrainConfig& cfg,
                      std::uint64_t seed);

/// Same protocol as all-layer fine-tuning from a fresh initialization.
TrainedModel train_scratch(const nn::NetConfig& net_cfg, const WindowStore& store, const LabelledSet& train,
                           const LabelledSet& val, int n_classes, const TrainConfig& cfg, std::uint64_t seed);

/// Trains trunk + head on every class of a labelled source store (7:1
/// subject split for early stopping) and returns the trunk with the source
/// head removed.
nn::Network<float> supervised_pretrain(const WindowStore& source, const nn::NetConfig& net_cfg,
                                       const TrainConfig& cfg, std::uint64_t seed);

std::vector<int> predict(nn::Network<float>& net, const WindowStore& store, std::span<const std::size_t> rows);

struct SubjectScore {
    std::size_t fold = 0;
    std::string subject;
    double f1 = 0.0;
    double kappa = 0.0;
    std::size_t windows = 0;
};

struct EvalReport {
    std::string dataset;
    std::string model;
    std::vector<SubjectScore> subjects;
    std::vector<Confusion> confusions; // one per fold
    MeanSd f1, kappa;

    /// Adds one fold's test predictions (labels in plan ids).
    void add_fold(std::size_t fold, const LabelledSet& test, std::span<const int> predicted, int n_classes);
    /// Recomputes mean and population SD across subjects.
    void finalize();
};

enum class ModelFamily { finetune_all, finetune_head, scratch, forest, transfer };
std::string family_name(ModelFamily f);

struct DownstreamConfig {
    nn::NetConfig net = nn::NetConfig::tiny();
    TrainConfig train;
    ForestConfig forest;
    /// Use only the first `max_folds` folds (0 = all).
    int max_folds = 0;
    /// Keep only this many training subjects per fold (0 = all), taken from
    /// a seeded nested order so smaller counts are subsets of larger ones.
    int train_subjects = 0;
};

/// Runs `family` over every fold of `plan`. Neural families other than
/// scratch start from `pretrained` (the transfer family expects a
/// supervised_pretrain trunk).
EvalReport cross_validate(const WindowStore& store, const CvPlan& plan, ModelFamily family,
                          const DownstreamConfig& cfg, const nn::Network<float>* pretrained, std::uint64_t seed,
                          const std::string& dataset = "dataset");

struct VolumePoint {
    int subjects = 0;
    std::string model;
    MeanSd f1;
};

/// F1 versus number of labelled training subjects for fine-tuning, scratch
/// training and the forest. Every count must not exceed the smallest fold's
/// training set.
std::vector<VolumePoint> label_volume_ablation(const WindowStore& store, const CvPlan& plan,
                                               const nn::Network<float>& pretrained, std::span<const int> counts,
                                               const DownstreamConfig& cfg, std::uint64_t seed);

/// Columns dataset,model,fold,subject,f1,kappa; per report two summary rows
/// with fold "all" and subject "mean" / "sd".
void write_eval_csv(const std::filesystem::path& path, std::span<const EvalReport> reports);
void write_volume_csv(const std::filesystem::path& path, std::span<const VolumePoint> points);

} // namespace har
