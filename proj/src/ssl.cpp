#include "har/ssl.hpp"

#include "har/error.hpp"
#include "har/nn/adam.hpp"
#include "har/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace har {

void SamplerConfig::validate() const {
    if (subjects_per_iter < 1 || windows_per_subject < 1)
        throw ConfigError("subjects_per_iter and windows_per_subject must be positive");
    if (!(intensity_floor > 0.0)) throw ConfigError("intensity_floor must be > 0");
    if (!(data_ratio > 0.0 && data_ratio <= 1.0)) throw ConfigError("data_ratio must be in (0, 1]");
}

SamplingPlan::SamplingPlan(const WindowStore& store) {
    for (auto& [subject, days] : store.index()) {
        subjects_.push_back(subject);
        for (auto& [d, idx] : days) total_ += idx.size();
        by_subject_.emplace(subject, days);
    }
}

SamplingPlan::SamplingPlan(const WindowStore& store, std::span<const std::string> subjects, double data_ratio,
                           Rng& rng) {
    const auto index = store.index();
    for (const auto& s : subjects) {
        auto it = index.find(s);
        if (it == index.end()) throw InputError(fmt::format("subject {} not in store", s));
        Days days;
        for (const auto& [d, idx] : it->second) {
            const auto keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(data_ratio * static_cast<double>(idx.size()))));
            const std::size_t start = keep < idx.size() ? rng.below(idx.size() - keep + 1) : 0;
            days[d].assign(idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(start + keep));
            total_ += keep;
        }
        subjects_.push_back(s);
        by_subject_.emplace(s, std::move(days));
    }
}

nn::HeadLabels PretextBatch::head_labels() const {
    nn::HeadLabels y;
    for (const auto& l : labels) {
        y[static_cast<int>(nn::Head::aot)].push_back(l.aot_applied ? 1 : 0);
        y[static_cast<int>(nn::Head::permutation)].push_back(l.permutation_applied ? 1 : 0);
        y[static_cast<int>(nn::Head::time_warp)].push_back(l.tw_applied ? 1 : 0);
    }
    return y;
}

std::vector<std::size_t> weighted_sample(const WindowStore& store, std::span<const std::size_t> candidates,
                                         int k, const SamplerConfig& cfg, Rng& rng) {
    if (candidates.empty()) throw InputError("cannot sample from an empty day");
    std::vector<std::size_t> out(static_cast<std::size_t>(std::max(k, 0)));
    if (!cfg.weighted) {
        for (auto& o : out) o = candidates[rng.below(candidates.size())];
        return out;
    }
    std::vector<double> cdf(candidates.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        acc += std::max(static_cast<double>(store.meta(candidates[i]).intensity), cfg.intensity_floor);
        cdf[i] = acc;
    }
    for (auto& o : out) {
        const double u = rng.uniform() * acc;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) --it;
        o = candidates[static_cast<std::size_t>(it - cdf.begin())];
    }
    return out;
}

std::vector<std::size_t> weighted_sample(const WindowStore& store, const std::string& subject, int day, int k,
                                         const SamplerConfig& cfg, Rng& rng) {
    const auto index = store.index();
    auto s = index.find(subject);
    if (s == index.end()) throw InputError(fmt::format("subject {} not in store", subject));
    auto d = s->second.find(day);
    if (d == s->second.end()) throw InputError(fmt::format("subject {} has no day {}", subject, day));
    return weighted_sample(store, d->second, k, cfg, rng);
}

PretextBatch build_pretext_batch(const WindowStore& store, const SamplingPlan& plan, const SamplerConfig& cfg,
                                 const TransformConfig& tcfg, Rng& rng) {
    if (plan.subjects().empty()) throw InputError("no subjects to sample from");
    tcfg.validate(store.length());
    std::vector<std::string> subjects = plan.subjects();
    const std::size_t take = std::min<std::size_t>(subjects.size(), static_cast<std::size_t>(cfg.subjects_per_iter));
    for (std::size_t i = 0; i < take; ++i) std::swap(subjects[i], subjects[i + rng.below(subjects.size() - i)]);
    subjects.resize(take);

    PretextBatch batch;
    for (const auto& s : subjects) {
        const auto& days = plan.days(s);
        auto it = days.begin();
        std::advance(it, static_cast<std::ptrdiff_t>(rng.below(days.size())));
        for (auto idx : weighted_sample(store, it->second, cfg.windows_per_subject, cfg, rng))
            batch.provenance.push_back({s, it->first, idx});
    }
    const std::size_t n = batch.provenance.size();
    batch.windows.resize(n);
    batch.labels.resize(n);
    const Rng rows = rng.split(0x7261);
    parallel_for(n, [&](std::size_t i) {
        Rng r = rows.split(i);
        auto sample = apply_pretext(random_rotation(store.window(batch.provenance[i].index), r), tcfg, r);
        batch.windows[i] = std::move(sample.window);
        batch.labels[i] = sample.label;
    });
    // Advance the caller's stream past the per-row substreams.
    rng.next_u64();
    return batch;
}

PretextBatch build_pretext_batch(const WindowStore& store, const SamplerConfig& cfg, const TransformConfig& tcfg,
                                 Rng& rng) {
    if (store.empty()) throw InputError("window store is empty");
    return build_pretext_batch(store, SamplingPlan(store), cfg, tcfg, rng);
}

namespace {

struct TaskScores {
    std::array<double, nn::kPretextHeadCount> correct{};
    std::array<double, nn::kPretextHeadCount> loss{};
    std::size_t rows = 0;

    void add(const nn::ForwardOutput<float>& out, const nn::HeadLabels& y) {
        for (int h = 0; h < nn::kPretextHeadCount; ++h) {
            const auto& z = out.logits[h];
            const auto pred = nn::argmax_rows<float>(z, 2);
            for (std::size_t n = 0; n < pred.size(); ++n) {
                if (pred[n] == y[h][n]) correct[h] += 1.0;
                const double a = z[2 * n], b = z[2 * n + 1];
                const double mx = std::max(a, b);
                const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
                loss[h] += lse - (y[h][n] ? b : a);
            }
        }
        rows += out.N;
    }
    double accuracy(int h) const { return rows ? correct[h] / static_cast<double>(rows) : 0.0; }
    double mean_loss(int h) const { return rows ? loss[h] / static_cast<double>(rows) : 0.0; }
};

constexpr std::array<nn::Head, 3> kPretextHeads = {nn::Head::aot, nn::Head::permutation, nn::Head::time_warp};

TaskScores score(nn::Network<float>& net, std::span<const PretextBatch> batches) {
    TaskScores s;
    for (const auto& b : batches) {
        if (b.size() == 0) continue;
        const auto x = nn::pack_windows<float>(b.windows);
        s.add(net.forward(x, nn::Mode::eval, kPretextHeads), b.head_labels());
    }
    return s;
}

} // namespace

std::array<double, nn::kPretextHeadCount> per_task_accuracy(nn::Network<float>& net,
                                                            std::span<const PretextBatch> batches) {
    const auto s = score(net, batches);
    std::array<double, nn::kPretextHeadCount> acc{};
    for (int h = 0; h < nn::kPretextHeadCount; ++h) acc[h] = s.accuracy(h);
    return acc;
}

std::string pretext_task_name(int head) { return std::string(nn::head_name(static_cast<nn::Head>(head))); }

void PretrainConfig::validate() const {
    net.validate();
    sampler.validate();
    transforms.validate(static_cast<std::size_t>(net.input_T));
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be > 0");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0, 1)");
    if (max_eval_batches < 1) throw ConfigError("max_eval_batches must be >= 1");
}

PretrainResult pretrain(const WindowStore& store, const PretrainConfig& cfg, std::uint64_t seed,
                        const ProgressFn& progress) {
    cfg.validate();
    if (store.empty()) throw InputError("window store is empty");
    if (store.length() != static_cast<std::size_t>(cfg.net.input_T))
        throw ConfigError(fmt::format("store windows have {} samples, network expects {}", store.length(),
                                      cfg.net.input_T));
    auto subjects = store.subjects();
    if (subjects.size() < 2) throw InputError("pre-training needs at least 2 subjects for the train/test split");

    const Rng root(seed);
    PretrainResult result;
    Rng init = root.split(1);
    result.checkpoint.net = nn::Network<float>::build(cfg.net, init);
    result.checkpoint.seed = seed;

    Rng split_rng = root.split(2);
    for (std::size_t i = subjects.size() - 1; i > 0; --i) std::swap(subjects[i], subjects[split_rng.below(i + 1)]);
    const auto n_test = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.test_fraction * static_cast<double>(subjects.size()))), 1,
        subjects.size() - 1);
    result.test_subjects.assign(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_test));
    result.train_subjects.assign(subjects.begin() + static_cast<std::ptrdiff_t>(n_test), subjects.end());
    std::sort(result.test_subjects.begin(), result.test_subjects.end());
    std::sort(result.train_subjects.begin(), result.train_subjects.end());
    {
        std::set<std::string> a(result.train_subjects.begin(), result.train_subjects.end());
        for (const auto& s : result.test_subjects)
            if (a.count(s)) throw InvariantError(fmt::format("subject {} in both SSL train and test", s));
    }
    if (cfg.epochs == 0) return result;

    Rng ratio_rng = root.split(3);
    const SamplingPlan train_plan(store, result.train_subjects, cfg.sampler.data_ratio, ratio_rng);
    Rng full_rng = root.split(4);
    const SamplingPlan test_plan(store, result.test_subjects, 1.0, full_rng);

    const int batch = static_cast<int>(
        std::min<std::size_t>(train_plan.subjects().size(), static_cast<std::size_t>(cfg.sampler.subjects_per_iter))) *
                      cfg.sampler.windows_per_subject;
    const auto iters = static_cast<int>((train_plan.total_windows() + static_cast<std::size_t>(batch) - 1) /
                                        static_cast<std::size_t>(batch));
    const int n_eval = std::min(cfg.max_eval_batches,
                                static_cast<int>((test_plan.total_windows() + static_cast<std::size_t>(batch) - 1) /
                                                 static_cast<std::size_t>(batch)));
    std::vector<PretextBatch> eval_batches;
    Rng eval_rng = root.split(5);
    for (int i = 0; i < std::max(n_eval, 1); ++i)
        eval_batches.push_back(build_pretext_batch(store, test_plan, cfg.sampler, cfg.transforms, eval_rng));

    auto& net = result.checkpoint.net;
    nn::AdamState<float> adam;
    nn::Network<float> best_net = net;
    nn::AdamState<float> best_adam;
    double best_mean = -1.0;
    const Rng train_rng = root.split(6);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        TaskScores train_scores;
        double lr = 0.0;
        for (int it = 0; it < iters; ++it) {
            Rng brng = train_rng.split(static_cast<std::uint64_t>(epoch) * 1000003ull + static_cast<std::uint64_t>(it));
            const auto b = build_pretext_batch(store, train_plan, cfg.sampler, cfg.transforms, brng);
            const auto x = nn::pack_windows<float>(b.windows);
            auto y = b.head_labels();
            const auto r = net.loss_and_grad(x, y, true);
            train_scores.add(r.out, y);
            lr = nn::lr_schedule(epoch + static_cast<double>(it) / iters, cfg.base_lr, batch);
            nn::adam_step(net.params(), adam, nn::AdamConfig{lr});
        }
        const auto test_scores = score(net, eval_batches);
        double mean = 0.0;
        for (int h = 0; h < nn::kPretextHeadCount; ++h) {
            result.history.push_back({epoch, pretext_task_name(h), "train", train_scores.accuracy(h),
                                      train_scores.mean_loss(h), lr});
            result.history.push_back({epoch, pretext_task_name(h), "test", test_scores.accuracy(h),
                                      test_scores.mean_loss(h), lr});
            mean += test_scores.accuracy(h) / nn::kPretextHeadCount;
        }
        if (progress)
            progress(fmt::format("epoch {} test aot {:.3f} permutation {:.3f} time_warp {:.3f}", epoch,
                                 test_scores.accuracy(0), test_scores.accuracy(1), test_scores.accuracy(2)));
        if (mean > best_mean) {
            best_mean = mean;
            result.best_epoch = epoch;
            for (int h = 0; h < nn::kPretextHeadCount; ++h) result.best_test_accuracy[h] = test_scores.accuracy(h);
            best_net = net;
            best_adam = adam;
        } else if (epoch - result.best_epoch >= cfg.patience) {
            break;
        }
    }
    result.checkpoint.net = std::move(best_net);
    result.checkpoint.adam = std::move(best_adam);
    return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> rows) {
    std::ofstream os(path);
    if (!os) throw InputError(fmt::format("cannot write {}", path.string()));
    os << "epoch,task,split,accuracy,loss,lr\n";
    for (const auto& r : rows)
        os << fmt::format("{},{},{},{:.6f},{:.6f},{:.8g}\n", r.epoch, r.task, r.split, r.accuracy, r.loss, r.lr);
}

double accuracy_auc(std::span<const HistoryRow> rows, const std::string& task, const std::string& split) {
    std::vector<std::pair<int, double>> pts;
    for (const auto& r : rows)
        if (r.task == task && r.split == split) pts.emplace_back(r.epoch, r.accuracy);
    if (pts.empty()) return 0.0;
    std::sort(pts.begin(), pts.end());
    if (pts.size() == 1) return pts[0].second;
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += 0.5 * (pts[i].second + pts[i - 1].second) * (pts[i].first - pts[i - 1].first);
    return area / (pts.back().first - pts.front().first);
}

} // namespace har
