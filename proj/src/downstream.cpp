#include "har/downstream.hpp"

#include "har/error.hpp"
#include "har/features.hpp"
#include "har/nn/adam.hpp"
#include "har/parallel.hpp"
#include "har/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace har {

void TrainConfig::validate() const {
    if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
}

LabelledSet select(const WindowStore& store, std::span<const std::string> subjects, const CvPlan& plan) {
    if (!store.labelled()) throw InputError("downstream training needs a labelled store");
    const std::set<std::string> wanted(subjects.begin(), subjects.end());
    LabelledSet out;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& m = store.meta(i);
        if (!wanted.count(m.subject_id)) continue;
        const int c = plan.remap(m.label);
        if (c < 0) continue;
        out.rows.push_back(i);
        out.labels.push_back(c);
        out.subjects.push_back(m.subject_id);
    }
    return out;
}

namespace {

nn::Act<float> pack_rows(const WindowStore& store, std::span<const std::size_t> rows) {
    nn::Act<float> x(kChannels, rows.size(), store.length());
    const std::size_t L = store.length();
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const auto raw = store.raw(rows[n]);
        for (int c = 0; c < kChannels; ++c)
            std::copy_n(raw.data() + c * L, L, x.v.data() + (c * rows.size() + n) * L);
    }
    return x;
}

void check_classes(const LabelledSet& train, int n_classes) {
    if (train.rows.empty()) throw InputError("empty training set");
    const std::set<int> seen(train.labels.begin(), train.labels.end());
    if (seen.size() < 2) throw InputError("training set has fewer than 2 classes");
    if (n_classes < 2) throw InputError("need at least 2 classes");
    if (*seen.rbegin() >= n_classes) throw InvariantError("label id exceeds the head's class count");
}

constexpr std::size_t kDown = static_cast<std::size_t>(nn::Head::downstream);

// Shared loop for all-layer and head-only training.
TrainedModel train_loop(nn::Network<float> net, const WindowStore& store, const LabelledSet& train,
                        const LabelledSet& val, int n_classes, bool head_only, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    check_classes(train, n_classes);
    if (net.config().input_T != static_cast<int>(store.length()))
        throw ConfigError(fmt::format("network expects {}-sample windows, store has {}", net.config().input_T,
                                      store.length()));
    net.attach_downstream(n_classes, rng);
    const std::size_t fd = static_cast<std::size_t>(net.config().feature_dim);

    std::vector<float> train_feats, val_feats;
    if (head_only) {
        train_feats = net.features(pack_rows(store, train.rows));
        if (!val.rows.empty()) val_feats = net.features(pack_rows(store, val.rows));
    }
    const LabelledSet& monitor = val.rows.empty() ? train : val;
    auto monitor_f1 = [&] {
        std::vector<int> pred;
        if (head_only) {
            const auto& f = val.rows.empty() ? train_feats : val_feats;
            pred = nn::argmax_rows<float>(net.head_logits(nn::Head::downstream, f, monitor.rows.size()),
                                          static_cast<std::size_t>(n_classes));
        } else {
            pred = predict(net, store, monitor.rows);
        }
        return macro_f1(monitor.labels, pred, n_classes);
    };

    TrainedModel best{net, -1, {}};
    if (cfg.max_epochs == 0) return best;
    double best_f1 = -1.0;
    nn::AdamState<float> adam;
    std::vector<std::size_t> order(train.rows.size());
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
    const auto iters = (order.size() + B - 1) / B;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (std::size_t it = 0; it < iters; ++it) {
            const std::size_t lo = it * B, hi = std::min(order.size(), lo + B);
            nn::HeadLabels y;
            for (std::size_t j = lo; j < hi; ++j) y[kDown].push_back(train.labels[order[j]]);
            if (head_only) {
                std::vector<float> f((hi - lo) * fd);
                for (std::size_t j = lo; j < hi; ++j)
                    std::copy_n(train_feats.data() + order[j] * fd, fd, f.data() + (j - lo) * fd);
                net.head_loss_and_grad(f, hi - lo, y);
            } else {
                std::vector<std::size_t> rows;
                for (std::size_t j = lo; j < hi; ++j) rows.push_back(train.rows[order[j]]);
                net.loss_and_grad(pack_rows(store, rows), y, true);
            }
            const double lr = nn::lr_schedule(epoch + static_cast<double>(it) / static_cast<double>(iters),
                                              cfg.base_lr, cfg.batch_size);
            nn::adam_step(net.params(), adam, nn::AdamConfig{lr});
        }
        const double f1 = monitor_f1();
        best.val_f1.push_back(f1);
        if (f1 > best_f1) {
            best_f1 = f1;
            best.best_epoch = epoch;
            best.net = net;
        } else if (epoch - best.best_epoch >= cfg.patience) {
            break;
        }
    }
    return best;
}

} // namespace

std::vector<int> predict(nn::Network<float>& net, const WindowStore& store, std::span<const std::size_t> rows) {
    if (rows.empty()) return {};
    const auto f = net.features(pack_rows(store, rows));
    return nn::argmax_rows<float>(net.head_logits(nn::Head::downstream, f, rows.size()),
                                  static_cast<std::size_t>(net.downstream_classes()));
}

TrainedModel finetune(const nn::Network<float>& pretrained, const WindowStore& store, const LabelledSet& train,
                      const LabelledSet& val, int n_classes, FinetuneMode mode, const TrainConfig& cfg,
                      std::uint64_t seed) {
    Rng rng(seed, 0xF1);
    return train_loop(pretrained, store, train, val, n_classes, mode == FinetuneMode::head_only, cfg, rng);
}

TrainedModel train_scratch(const nn::NetConfig& net_cfg, const WindowStore& store, const LabelledSet& train,
                           const LabelledSet& val, int n_classes, const TrainConfig& cfg, std::uint64_t seed) {
    Rng init(seed, 0x5C);
    auto net = nn::Network<float>::build(net_cfg, init);
    Rng rng(seed, 0xF1);
    return train_loop(std::move(net), store, train, val, n_classes, false, cfg, rng);
}

nn::Network<float> supervised_pretrain(const WindowStore& source, const nn::NetConfig& net_cfg,
                                       const TrainConfig& cfg, std::uint64_t seed) {
    if (!source.labelled()) throw InputError("supervised pre-training needs a labelled source store");
    auto subjects = source.subjects();
    Rng split(seed, 0x5E);
    for (std::size_t i = subjects.size(); i > 1; --i) std::swap(subjects[i - 1], subjects[split.below(i)]);
    std::size_t n_val = subjects.size() >= 2 ? std::max<std::size_t>(1, (subjects.size() + 4) / 8) : 0;
    CvPlan all;
    std::set<int> classes;
    for (const auto& m : source.metas()) classes.insert(m.label);
    all.classes.assign(classes.begin(), classes.end());
    const std::vector<std::string> val_s(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_val));
    const std::vector<std::string> train_s(subjects.begin() + static_cast<std::ptrdiff_t>(n_val), subjects.end());
    auto model = train_scratch(net_cfg, source, select(source, train_s, all), select(source, val_s, all),
                               static_cast<int>(all.classes.size()), cfg, seed);
    model.net.detach_downstream();
    return std::move(model.net);
}

void EvalReport::add_fold(std::size_t fold, const LabelledSet& test, std::span<const int> predicted,
                          int n_classes) {
    if (predicted.size() != test.labels.size()) throw InvariantError("prediction count differs from test set");
    confusions.push_back(confusion_matrix(test.labels, predicted, n_classes));
    std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> by_subject;
    for (std::size_t i = 0; i < test.labels.size(); ++i) {
        by_subject[test.subjects[i]].first.push_back(test.labels[i]);
        by_subject[test.subjects[i]].second.push_back(predicted[i]);
    }
    for (const auto& [s, yp] : by_subject) {
        const auto cm = confusion_matrix(yp.first, yp.second, n_classes);
        subjects.push_back({fold, s, macro_f1(cm), cohen_kappa(cm), yp.first.size()});
    }
}

void EvalReport::finalize() {
    std::vector<double> f, k;
    for (const auto& s : subjects) {
        f.push_back(s.f1);
        k.push_back(s.kappa);
    }
    f1 = mean_sd(f);
    kappa = mean_sd(k);
}

std::string family_name(ModelFamily f) {
    switch (f) {
    case ModelFamily::finetune_all: return "finetune_all";
    case ModelFamily::finetune_head: return "finetune_head";
    case ModelFamily::scratch: return "scratch";
    case ModelFamily::forest: return "forest";
    case ModelFamily::transfer: return "transfer";
    }
    return "?";
}

namespace {

std::vector<std::string> nested_subset(std::vector<std::string> subjects, int count, Rng& rng) {
    for (std::size_t i = subjects.size(); i > 1; --i) std::swap(subjects[i - 1], subjects[rng.below(i)]);
    if (count > 0) {
        if (static_cast<std::size_t>(count) > subjects.size())
            throw ConfigError(fmt::format("requested {} training subjects but the fold has {}", count,
                                          subjects.size()));
        subjects.resize(static_cast<std::size_t>(count));
    }
    std::sort(subjects.begin(), subjects.end());
    return subjects;
}

std::vector<FeatureVector> window_features(const WindowStore& store, std::span<const std::size_t> rows) {
    std::vector<FeatureVector> out(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) { out[i] = extract_features(store.window(rows[i])); });
    return out;
}

} // namespace

EvalReport cross_validate(const WindowStore& store, const CvPlan& plan, ModelFamily family,
                          const DownstreamConfig& cfg, const nn::Network<float>* pretrained, std::uint64_t seed,
                          const std::string& dataset) {
    const bool needs_pretrained = family == ModelFamily::finetune_all || family == ModelFamily::finetune_head ||
                                  family == ModelFamily::transfer;
    if (needs_pretrained && !pretrained)
        throw ConfigError(fmt::format("{} needs a pre-trained network", family_name(family)));
    EvalReport report;
    report.dataset = dataset;
    report.model = family_name(family);
    const int n_classes = static_cast<int>(plan.classes.size());
    std::size_t n_folds = plan.folds.size();
    if (cfg.max_folds > 0) n_folds = std::min(n_folds, static_cast<std::size_t>(cfg.max_folds));
    const Rng root(seed, 0xD0);
    for (std::size_t f = 0; f < n_folds; ++f) {
        const auto& fold = plan.folds[f];
        Rng subset_rng = root.split(f);
        const auto train_subjects = nested_subset(fold.train, cfg.train_subjects, subset_rng);
        const auto train = select(store, train_subjects, plan);
        const auto val = select(store, fold.val, plan);
        const auto test = select(store, fold.test, plan);
        if (test.rows.empty()) continue;
        const std::uint64_t fold_seed = root.split(1000 + f).next_u64();
        std::vector<int> pred;
        switch (family) {
        case ModelFamily::finetune_all:
        case ModelFamily::transfer:
        {
            auto m = finetune(*pretrained, store, train, val, n_classes, FinetuneMode::all_layers, cfg.train, fold_seed);
            pred = predict(m.net, store, test.rows);
            break;
        }
        case ModelFamily::finetune_head:
        {
            auto m = finetune(*pretrained, store, train, val, n_classes, FinetuneMode::head_only, cfg.train, fold_seed);
            pred = predict(m.net, store, test.rows);
            break;
        }
        case ModelFamily::scratch:
        {
            auto m = train_scratch(cfg.net, store, train, val, n_classes, cfg.train, fold_seed);
            pred = predict(m.net, store, test.rows);
            break;
        }
        case ModelFamily::forest: {
            // The forest needs no validation split; it trains on train + val.
            auto rows = train.rows;
            auto labels = train.labels;
            rows.insert(rows.end(), val.rows.begin(), val.rows.end());
            labels.insert(labels.end(), val.labels.begin(), val.labels.end());
            const auto X = FeatureMatrix::from(window_features(store, rows));
            const auto model = train_forest(X, labels, cfg.forest, Rng(fold_seed, 0xF0));
            pred = forest_predict(model, FeatureMatrix::from(window_features(store, test.rows)));
            break;
        }
        }
        report.add_fold(f, test, pred, n_classes);
    }
    report.finalize();
    return report;
}

std::vector<VolumePoint> label_volume_ablation(const WindowStore& store, const CvPlan& plan,
                                               const nn::Network<float>& pretrained, std::span<const int> counts,
                                               const DownstreamConfig& cfg, std::uint64_t seed) {
    std::size_t smallest = SIZE_MAX;
    for (const auto& f : plan.folds) smallest = std::min(smallest, f.train.size());
    for (int c : counts)
        if (c < 1 || static_cast<std::size_t>(c) > smallest)
            throw ConfigError(fmt::format("subject count {} outside [1, {}]", c, smallest));
    std::vector<VolumePoint> out;
    for (int c : counts) {
        DownstreamConfig dc = cfg;
        dc.train_subjects = c;
        for (auto fam : {ModelFamily::finetune_all, ModelFamily::scratch, ModelFamily::forest}) {
            const auto r = cross_validate(store, plan, fam, dc, &pretrained, seed);
            out.push_back({c, family_name(fam), r.f1});
        }
    }
    return out;
}

void write_eval_csv(const std::filesystem::path& path, std::span<const EvalReport> reports) {
    std::ofstream os(path);
    if (!os) throw InputError(fmt::format("cannot write {}", path.string()));
    os << "dataset,model,fold,subject,f1,kappa\n";
    for (const auto& r : reports) {
        for (const auto& s : r.subjects)
            os << fmt::format("{},{},{},{},{:.6f},{:.6f}\n", r.dataset, r.model, s.fold, s.subject, s.f1, s.kappa);
        os << fmt::format("{},{},all,mean,{:.6f},{:.6f}\n", r.dataset, r.model, r.f1.mean, r.kappa.mean);
        os << fmt::format("{},{},all,sd,{:.6f},{:.6f}\n", r.dataset, r.model, r.f1.sd, r.kappa.sd);
    }
}

void write_volume_csv(const std::filesystem::path& path, std::span<const VolumePoint> points) {
    std::ofstream os(path);
    if (!os) throw InputError(fmt::format("cannot write {}", path.string()));
    os << "subjects,model,f1_mean,f1_sd\n";
    for (const auto& p : points) os << fmt::format("{},{},{:.6f},{:.6f}\n", p.subjects, p.model, p.f1.mean, p.f1.sd);
}

} // namespace har
