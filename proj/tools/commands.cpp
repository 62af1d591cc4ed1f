#include "commands.hpp"

#include "har/cv.hpp"
#include "har/downstream.hpp"
#include "har/error.hpp"
#include "har/explain/attribution.hpp"
#include "har/explain/cwt.hpp"
#include "har/explain/graph.hpp"
#include "har/explain/masking.hpp"
#include "har/explain/render.hpp"
#include "har/features.hpp"
#include "har/nn/checkpoint.hpp"
#include "har/ssl.hpp"
#include "har/synth.hpp"
#include "har/window_store.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <set>

namespace har::cli {

namespace fs = std::filesystem;

namespace {

void log(const std::string& s) { fmt::print("{}\n", s); }

WindowStore load_store(const RunConfig& rc, std::string_view key = "data.store") {
    const auto& p = rc.str(key);
    if (p.empty()) throw ConfigError(fmt::format("{} is required", key));
    return WindowStore::load(p);
}

nn::Checkpoint load_checkpoint(const RunConfig& rc) {
    const auto& p = rc.str("model.checkpoint");
    if (p.empty()) throw ConfigError("model.checkpoint is required");
    return nn::Checkpoint::load(p);
}

DownstreamConfig read_downstream(const RunConfig& rc) {
    DownstreamConfig c;
    c.net = read_net(rc);
    c.train = read_train(rc);
    c.forest = read_forest(rc);
    c.max_folds = static_cast<int>(rc.integer("cv.max_folds"));
    c.train_subjects = static_cast<int>(rc.integer("cv.train_subjects"));
    if (c.max_folds < 0 || c.train_subjects < 0) throw ConfigError("cv.max_folds and cv.train_subjects must be >= 0");
    return c;
}

void declare_downstream(RunConfig& rc) {
    declare_net(rc);
    declare_train(rc);
    declare_forest(rc);
    rc.declare("data.store", "", "labelled window store");
    rc.declare("data.name", "dataset", "dataset name written to the CSV");
    rc.declare("cv.max_folds", "0", "evaluate only the first N folds (0 = all)");
    rc.declare("cv.train_subjects", "0", "labelled training subjects per fold (0 = all)");
}

void evaluate(const RunConfig& rc, const fs::path& out, ModelFamily family, const nn::Network<float>* pretrained) {
    const auto store = load_store(rc);
    const auto seed = rc.u64("seed");
    const auto plan = make_cv_plan(store, seed);
    check_cv_plan(plan, subject_classes(store));
    log(fmt::format("{} folds ({}), {} classes", plan.folds.size(), plan.mode == CvMode::loso ? "loso" : "5-fold",
                    plan.classes.size()));
    const auto report = cross_validate(store, plan, family, read_downstream(rc), pretrained, seed, rc.str("data.name"));
    write_eval_csv(out / "eval.csv", std::span(&report, 1));
    log(fmt::format("{} macro-F1 {:.3f} +- {:.3f}, kappa {:.3f}", report.model, report.f1.mean, report.f1.sd,
                    report.kappa.mean));
}

// Trains on every subject of a labelled store (1/8 held out for early
// stopping) with the store's own class ids, for the eval command.
void export_model(const RunConfig& rc, const fs::path& out, const nn::Network<float>* pretrained, FinetuneMode mode) {
    const auto store = load_store(rc);
    auto subjects = store.subjects();
    Rng rng(rc.u64("seed"), 0xE7);
    for (std::size_t i = subjects.size(); i > 1; --i) std::swap(subjects[i - 1], subjects[rng.below(i)]);
    const std::size_t n_val = subjects.size() >= 2 ? std::max<std::size_t>(1, (subjects.size() + 4) / 8) : 0;
    CvPlan all;
    int max_label = -1;
    for (const auto& m : store.metas()) max_label = std::max(max_label, static_cast<int>(m.label));
    for (int c = 0; c <= max_label; ++c) all.classes.push_back(c);
    const std::vector<std::string> val_s(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n_val));
    const std::vector<std::string> train_s(subjects.begin() + static_cast<std::ptrdiff_t>(n_val), subjects.end());
    const auto train = select(store, train_s, all), val = select(store, val_s, all);
    const auto cfg = read_train(rc);
    auto m = pretrained ? finetune(*pretrained, store, train, val, max_label + 1, mode, cfg, rc.u64("seed"))
                        : train_scratch(read_net(rc), store, train, val, max_label + 1, cfg, rc.u64("seed"));
    nn::Checkpoint ck;
    ck.net = std::move(m.net);
    ck.seed = rc.u64("seed");
    ck.save(out / "model.bin");
    log(fmt::format("exported model.bin (best epoch {})", m.best_epoch));
}

void cmd_synth(const RunConfig& rc, const fs::path& out) {
    auto spec = read_synth(rc);
    spec.seed = rc.u64("seed");
    const auto store = generate_synthetic(spec);
    store.save(out / "store.bin");
    log(fmt::format("wrote {} windows from {} subjects (corpus version {})", store.size(), spec.n_subjects,
                    SynthSpec::kVersion));
}

void cmd_ingest(const RunConfig& rc, const fs::path& out) {
    const auto& manifest = rc.str("ingest.manifest");
    if (manifest.empty()) throw ConfigError("ingest.manifest is required");
    const auto sources = read_manifest(manifest);
    const auto store = ingest_csv(sources, rc.real("ingest.rate"), rc.boolean("ingest.labelled"));
    store.save(out / "store.bin");
    log(fmt::format("wrote {} windows from {} files", store.size(), sources.size()));
}

void cmd_pretrain(const RunConfig& rc, const fs::path& out) {
    const auto store = load_store(rc);
    const auto cfg = read_pretrain(rc);
    auto r = pretrain(store, cfg, rc.u64("seed"), log);
    r.checkpoint.save(out / "checkpoint.bin");
    write_history_csv(out / "history.csv", r.history);
    std::ofstream split(out / "split.csv");
    split << "subject,split\n";
    for (const auto& s : r.train_subjects) split << s << ",train\n";
    for (const auto& s : r.test_subjects) split << s << ",test\n";
    log(fmt::format("best epoch {}: aot {:.3f} permutation {:.3f} time_warp {:.3f}", r.best_epoch,
                    r.best_test_accuracy[0], r.best_test_accuracy[1], r.best_test_accuracy[2]));
}

void cmd_finetune(const RunConfig& rc, const fs::path& out) {
    const auto ck = load_checkpoint(rc);
    const auto& mode = rc.str("finetune.mode");
    if (mode != "all" && mode != "head") throw ConfigError("finetune.mode must be all or head");
    evaluate(rc, out, mode == "all" ? ModelFamily::finetune_all : ModelFamily::finetune_head, &ck.net);
    if (rc.boolean("export"))
        export_model(rc, out, &ck.net, mode == "all" ? FinetuneMode::all_layers : FinetuneMode::head_only);
}

void cmd_scratch(const RunConfig& rc, const fs::path& out) {
    evaluate(rc, out, ModelFamily::scratch, nullptr);
    if (rc.boolean("export")) export_model(rc, out, nullptr, FinetuneMode::all_layers);
}

void cmd_transfer(const RunConfig& rc, const fs::path& out) {
    const auto source = load_store(rc, "data.source");
    auto trunk = supervised_pretrain(source, read_net(rc), read_train(rc), rc.u64("seed"));
    nn::Checkpoint ck;
    ck.net = trunk;
    ck.seed = rc.u64("seed");
    ck.save(out / "source_trunk.bin");
    evaluate(rc, out, ModelFamily::transfer, &trunk);
}

void cmd_rf(const RunConfig& rc, const fs::path& out) { evaluate(rc, out, ModelFamily::forest, nullptr); }

void cmd_eval(const RunConfig& rc, const fs::path& out) {
    auto ck = load_checkpoint(rc);
    const auto store = load_store(rc);
    if (!store.labelled()) throw InputError("eval needs a labelled store");
    const int k = ck.net.downstream_classes();
    if (k == 0) throw ConfigError("checkpoint has no activity head; export one with finetune or scratch");
    std::vector<std::size_t> rows;
    LabelledSet all;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const int y = store.meta(i).label;
        if (y < 0 || y >= k) continue;
        all.rows.push_back(i);
        all.labels.push_back(y);
        all.subjects.push_back(store.meta(i).subject_id);
    }
    if (all.rows.empty()) throw InputError("no windows with classes known to the model");
    const auto pred = predict(ck.net, store, all.rows);
    EvalReport report;
    report.dataset = rc.str("data.name");
    report.model = "checkpoint";
    report.add_fold(0, all, pred, k);
    report.finalize();
    write_eval_csv(out / "eval.csv", std::span(&report, 1));
    log(fmt::format("macro-F1 {:.3f} +- {:.3f}, kappa {:.3f}", report.f1.mean, report.f1.sd, report.kappa.mean));
}

nn::Head parse_head(std::string_view s) {
    for (int h = 0; h < nn::kHeadCount; ++h)
        if (nn::head_name(static_cast<nn::Head>(h)) == s) return static_cast<nn::Head>(h);
    throw ConfigError(fmt::format("unknown head '{}'", s));
}

std::vector<explain::Method> parse_methods(std::string_view s) {
    using explain::Method;
    if (s == "all")
        return {Method::lrp0, Method::lrp_eps, Method::lrp_cmp, Method::saliency, Method::gbp, Method::ig};
    std::vector<Method> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = std::min(s.find(',', pos), s.size());
        out.push_back(explain::parse_method(s.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

void cmd_explain(const RunConfig& rc, const fs::path& out) {
    auto ck = load_checkpoint(rc);
    const auto store = load_store(rc);
    const auto idx = static_cast<std::size_t>(rc.integer("explain.window"));
    if (idx >= store.size()) throw ConfigError(fmt::format("explain.window {} outside store of {}", idx, store.size()));
    const auto head = parse_head(rc.str("explain.head"));
    if (ck.net.head_classes(head) == 0) throw ConfigError("checkpoint has no activity head");
    const auto window = store.window(idx);
    const auto graph = explain::EvalGraph::from(ck.net);
    int cls = static_cast<int>(rc.integer("explain.class"));
    const auto logits = graph.forward(window)[graph.head_node(head)];
    if (cls < 0) cls = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    const auto lrp = read_lrp(rc);
    const auto norm = euclidean_norm(window);
    const auto scal = explain::cwt_morlet(norm, window.rate(), static_cast<int>(rc.integer("explain.scales")));
    explain::write_scalogram_csv(out / "scalogram.csv", scal);
    std::ofstream summary(out / "summary.csv");
    summary << "method,head,class,output,relevance_sum\n";
    for (auto m : parse_methods(rc.str("explain.methods"))) {
        const auto map = explain::attribute(graph, window, head, cls, m, lrp);
        const auto name = std::string(explain::method_name(m));
        explain::write_relevance_csv(out / fmt::format("relevance_{}.csv", name), map);
        explain::write_text(out / fmt::format("panel_{}.svg", name),
                            explain::render_panel_svg(window, scal, map,
                                                      fmt::format("window {} ({}), {} class {}, {}", idx,
                                                                  store.meta(idx).subject_id, nn::head_name(head), cls,
                                                                  name)));
        summary << fmt::format("{},{},{},{:.17g},{:.17g}\n", name, nn::head_name(head), cls, map.output, map.sum());
    }
    log(fmt::format("explained window {} for {} class {}", idx, nn::head_name(head), cls));
}

std::vector<SignalWindow> windows_of(const WindowStore& store, std::string_view subjects_csv) {
    std::set<std::string> wanted;
    std::size_t pos = 0;
    while (pos < subjects_csv.size()) {
        const auto next = std::min(subjects_csv.find(',', pos), subjects_csv.size());
        if (next > pos) wanted.emplace(subjects_csv.substr(pos, next - pos));
        pos = next + 1;
    }
    std::vector<SignalWindow> out;
    for (std::size_t i = 0; i < store.size(); ++i)
        if (wanted.empty() || wanted.count(store.meta(i).subject_id)) out.push_back(store.window(i));
    return out;
}

void cmd_mask(const RunConfig& rc, const fs::path& out) {
    const auto ck = load_checkpoint(rc);
    const auto store = load_store(rc);
    auto windows = windows_of(store, rc.str("mask.subjects"));
    const auto intensity_min = rc.real("mask.min_intensity");
    std::erase_if(windows, [&](const SignalWindow& w) { return window_intensity(w) < intensity_min; });
    const auto set = explain::build_aot_eval_set(ck.net, windows, static_cast<std::size_t>(rc.integer("mask.max_pairs")));
    log(fmt::format("{} pairs kept, source AoT accuracy {:.3f}", set.windows.size() / 2, set.source_accuracy));
    const auto lrp = read_lrp(rc);
    const Rng rng(rc.u64("seed"), 0x3A5C);
    std::vector<explain::MaskCurve> curves;
    for (auto m : parse_methods(rc.str("mask.methods")))
        curves.push_back(explain::mask_faithfulness(ck.net, set, m, explain::MaskOrder::relevance, rng, lrp));
    curves.push_back(explain::mask_faithfulness(ck.net, set, explain::Method::lrp_cmp, explain::MaskOrder::random, rng, lrp));
    curves.push_back(explain::mask_faithfulness(ck.net, set, explain::Method::lrp_cmp, explain::MaskOrder::temporal, rng, lrp));
    explain::write_mask_csv(out / "mask.csv", curves);
    std::ofstream auc(out / "mask_auc.csv");
    auc << "order,method,auc\n";
    for (const auto& c : curves) {
        auc << fmt::format("{},{},{:.17g}\n", explain::mask_order_name(c.order), explain::method_name(c.method), c.auc);
        log(fmt::format("{:>10} {:>9} auc {:.4f}", explain::mask_order_name(c.order), explain::method_name(c.method),
                        c.auc));
    }
}

void cmd_ablate(const RunConfig& rc, const fs::path& out) {
    const auto& kind = rc.str("ablate.kind");
    const auto seed = rc.u64("seed");
    if (kind == "volume") {
        const auto counts = parse_counts(rc.str("ablate.subjects"));
        const auto store = load_store(rc);
        const auto plan = make_cv_plan(store, seed);
        std::size_t smallest = SIZE_MAX;
        for (const auto& f : plan.folds) smallest = std::min(smallest, f.train.size());
        for (int c : counts)
            if (static_cast<std::size_t>(c) > smallest)
                throw ConfigError(fmt::format("ablate.subjects asks for {} training subjects but the store only "
                                              "provides {} per fold",
                                              c, smallest));
        const auto ck = load_checkpoint(rc);
        const auto points = label_volume_ablation(store, plan, ck.net, counts, read_downstream(rc), seed);
        write_volume_csv(out / "volume.csv", points);
        for (const auto& p : points) log(fmt::format("{:>4} {:>13} F1 {:.3f}", p.subjects, p.model, p.f1.mean));
    } else if (kind == "sampling") {
        const auto store = load_store(rc);
        auto cfg = read_pretrain(rc);
        std::ofstream auc(out / "sampling_auc.csv");
        auc << "weighted,task,auc,final_accuracy\n";
        for (bool weighted : {true, false}) {
            cfg.sampler.weighted = weighted;
            const auto r = pretrain(store, cfg, seed, log);
            write_history_csv(out / fmt::format("history_{}.csv", weighted ? "weighted" : "unweighted"), r.history);
            for (int h = 0; h < nn::kPretextHeadCount; ++h) {
                const auto task = pretext_task_name(h);
                double last = 0.0;
                for (const auto& row : r.history)
                    if (row.task == task && row.split == "test") last = row.accuracy;
                auc << fmt::format("{},{},{:.17g},{:.17g}\n", weighted, task, accuracy_auc(r.history, task, "test"),
                                   last);
            }
        }
    } else {
        throw ConfigError(fmt::format("ablate.kind must be volume or sampling, got '{}'", kind));
    }
}

void cmd_export_embeddings(const RunConfig& rc, const fs::path& out) {
    auto ck = load_checkpoint(rc);
    const auto store = load_store(rc);
    const auto D = static_cast<std::size_t>(ck.net.config().feature_dim);
    std::ofstream os(out / "embeddings.csv");
    os << "subject,day,label";
    for (std::size_t d = 0; d < D; ++d) os << ",f" << d;
    os << '\n';
    constexpr std::size_t chunk = 256;
    for (std::size_t lo = 0; lo < store.size(); lo += chunk) {
        const std::size_t hi = std::min(store.size(), lo + chunk);
        std::vector<SignalWindow> ws;
        for (std::size_t i = lo; i < hi; ++i) ws.push_back(store.window(i));
        const auto feats = ck.net.features(nn::pack_windows<float>(ws));
        for (std::size_t i = lo; i < hi; ++i) {
            const auto& m = store.meta(i);
            os << fmt::format("{},{},{}", m.subject_id, m.day_index, m.label);
            for (std::size_t d = 0; d < D; ++d) os << fmt::format(",{:.9g}", feats[(i - lo) * D + d]);
            os << '\n';
        }
    }
    log(fmt::format("wrote {} embeddings of dimension {}", store.size(), D));
}

} // namespace

std::vector<int> parse_counts(std::string_view text) {
    const auto num = [&](std::string_view s) {
        int v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size() || v < 1)
            throw ConfigError(fmt::format("'{}' is not a positive subject count", s));
        return v;
    };
    std::vector<int> out;
    if (const auto dots = text.find(".."); dots != std::string_view::npos) {
        const long long lo = num(text.substr(0, dots)), hi = num(text.substr(dots + 2));
        if (hi < lo) throw ConfigError(fmt::format("empty range '{}'", text));
        for (long long v = lo; v <= hi; v *= 10) out.push_back(static_cast<int>(v));
        return out;
    }
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto next = std::min(text.find(',', pos), text.size());
        out.push_back(num(text.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

const std::vector<Command>& commands() {
    static const std::vector<Command> table = [] {
        std::vector<Command> t;
        t.push_back({"synth", "generate the synthetic corpus", declare_synth, cmd_synth});
        t.push_back({"ingest", "resample and segment accelerometer CSVs into a store",
                     [](RunConfig& rc) {
                         rc.declare("ingest.manifest", "", "CSV of path,subject_id,day");
                         rc.declare("ingest.rate", "100", "source sampling rate (Hz)");
                         rc.declare("ingest.labelled", "false");
                     },
                     cmd_ingest});
        t.push_back({"pretrain", "multi-task self-supervised pre-training",
                     [](RunConfig& rc) {
                         declare_pretrain(rc);
                         rc.declare("data.store", "", "window store");
                     },
                     cmd_pretrain});
        t.push_back({"finetune", "cross-validated fine-tuning of a pre-trained trunk",
                     [](RunConfig& rc) {
                         declare_downstream(rc);
                         rc.declare("model.checkpoint", "", "pre-trained checkpoint");
                         rc.declare("finetune.mode", "all", "all | head");
                         rc.declare("export", "false", "also train on all subjects and write model.bin");
                     },
                     cmd_finetune});
        t.push_back({"scratch", "cross-validated training from random initialization",
                     [](RunConfig& rc) {
                         declare_downstream(rc);
                         rc.declare("export", "false", "also train on all subjects and write model.bin");
                     },
                     cmd_scratch});
        t.push_back({"transfer", "supervised pre-training on a labelled source, then fine-tuning",
                     [](RunConfig& rc) {
                         declare_downstream(rc);
                         rc.declare("data.source", "", "labelled source store");
                     },
                     cmd_transfer});
        t.push_back({"rf", "cross-validated random forest on handcrafted features", declare_downstream, cmd_rf});
        t.push_back({"eval", "score a model with an activity head on a labelled store",
                     [](RunConfig& rc) {
                         rc.declare("data.store", "", "labelled window store");
                         rc.declare("data.name", "dataset");
                         rc.declare("model.checkpoint", "", "checkpoint with an activity head");
                     },
                     cmd_eval});
        t.push_back({"explain", "relevance maps, scalogram and SVG panels for one window",
                     [](RunConfig& rc) {
                         declare_lrp(rc);
                         rc.declare("data.store", "");
                         rc.declare("model.checkpoint", "");
                         rc.declare("explain.window", "0", "store row");
                         rc.declare("explain.head", "aot", "aot | permutation | time_warp | downstream");
                         rc.declare("explain.class", "-1", "class to explain (-1 = predicted)");
                         rc.declare("explain.methods", "all", "comma list of lrp0,lrp_eps,lrp_cmp,saliency,gbp,ig");
                         rc.declare("explain.scales", "48", "CWT scales");
                     },
                     cmd_explain});
        t.push_back({"mask", "masking faithfulness of attribution methods on the AoT task",
                     [](RunConfig& rc) {
                         declare_lrp(rc);
                         rc.declare("data.store", "");
                         rc.declare("model.checkpoint", "");
                         rc.declare("mask.subjects", "", "comma list of subjects (empty = all)");
                         rc.declare("mask.max_pairs", "200", "0 = no limit");
                         rc.declare("mask.min_intensity", "0.01", "skip near-static windows");
                         rc.declare("mask.methods", "lrp_cmp", "comma list, or all");
                     },
                     cmd_mask});
        t.push_back({"ablate", "label-volume or weighted-sampling ablation",
                     [](RunConfig& rc) {
                         declare_downstream(rc);
                         declare_pretrain(rc);
                         rc.declare("model.checkpoint", "");
                         rc.declare("ablate.kind", "volume", "volume | sampling");
                         rc.declare("ablate.subjects", "1,2,4", "counts, or a decade range lo..hi");
                     },
                     cmd_ablate});
        t.push_back({"export-embeddings", "trunk features of every window as CSV",
                     [](RunConfig& rc) {
                         rc.declare("data.store", "");
                         rc.declare("model.checkpoint", "");
                     },
                     cmd_export_embeddings});
        return t;
    }();
    return table;
}

} // namespace har::cli
