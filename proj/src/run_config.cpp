#include "har/run_config.hpp"

#include "har/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace har {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, v));
    return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::string num(double v) { return fmt::format("{}", v); }

} // namespace

void RunConfig::declare(std::string key, std::string default_value, std::string help) {
    entries_[std::move(key)] = Entry{default_value, default_value, std::move(help)};
}

const RunConfig::Entry& RunConfig::entry(std::string_view key) const {
    const auto it = entries_.find(std::string(key));
    if (it == entries_.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    return it->second;
}

void RunConfig::set(std::string_view key, std::string value) {
    const auto it = entries_.find(std::string(key));
    if (it == entries_.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
    it->second.value = std::move(value);
}

void RunConfig::assign(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", assignment));
    const auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError(fmt::format("empty key in '{}'", assignment));
    set(key, std::string(trim(assignment.substr(eq + 1))));
}

void RunConfig::load_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError(fmt::format("cannot read config {}", path.string()));
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto s = trim(line);
        if (s.empty() || s.front() == '#') continue;
        try {
            assign(s);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
}

const std::string& RunConfig::str(std::string_view key) const { return entry(key).value; }

long long RunConfig::integer(std::string_view key) const { return parse_number<long long>(key, str(key)); }

std::uint64_t RunConfig::u64(std::string_view key) const { return parse_number<std::uint64_t>(key, str(key)); }

double RunConfig::real(std::string_view key) const { return parse_number<double>(key, str(key)); }

bool RunConfig::boolean(std::string_view key) const {
    const auto& v = str(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::string RunConfig::resolved() const {
    std::string out;
    for (const auto& [k, e] : entries_) out += fmt::format("{} = {}\n", k, e.value);
    return out;
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError(fmt::format("cannot write {}", path.string()));
    f << resolved();
}

std::string RunConfig::describe() const {
    std::string out;
    for (const auto& [k, e] : entries_)
        out += e.help.empty() ? fmt::format("  {} ({})\n", k, e.default_value)
                              : fmt::format("  {} ({}): {}\n", k, e.default_value, e.help);
    return out;
}

void declare_net(RunConfig& rc, const nn::NetConfig& d) {
    rc.declare("net.width_base", std::to_string(d.width_base), "channels of the first stage");
    rc.declare("net.n_stages", std::to_string(d.n_stages));
    rc.declare("net.blocks_per_stage", std::to_string(d.blocks_per_stage));
    rc.declare("net.feature_dim", std::to_string(d.feature_dim));
    rc.declare("net.kernel_size", std::to_string(d.kernel_size));
    rc.declare("net.head_hidden", std::to_string(d.head_hidden));
}

nn::NetConfig read_net(const RunConfig& rc) {
    nn::NetConfig c;
    c.width_base = static_cast<int>(rc.integer("net.width_base"));
    c.n_stages = static_cast<int>(rc.integer("net.n_stages"));
    c.blocks_per_stage = static_cast<int>(rc.integer("net.blocks_per_stage"));
    c.feature_dim = static_cast<int>(rc.integer("net.feature_dim"));
    c.kernel_size = static_cast<int>(rc.integer("net.kernel_size"));
    c.head_hidden = static_cast<int>(rc.integer("net.head_hidden"));
    c.validate();
    return c;
}

void declare_transforms(RunConfig& rc) {
    const TransformConfig d;
    rc.declare("transform.n_chunks", std::to_string(d.n_chunks));
    rc.declare("transform.min_chunk_len", std::to_string(d.min_chunk_len));
    rc.declare("transform.tw_knots", std::to_string(d.tw_knots));
    rc.declare("transform.tw_sigma", num(d.tw_sigma));
    rc.declare("transform.apply_prob", num(d.apply_prob));
}

TransformConfig read_transforms(const RunConfig& rc) {
    TransformConfig c;
    c.n_chunks = static_cast<int>(rc.integer("transform.n_chunks"));
    c.min_chunk_len = static_cast<int>(rc.integer("transform.min_chunk_len"));
    c.tw_knots = static_cast<int>(rc.integer("transform.tw_knots"));
    c.tw_sigma = rc.real("transform.tw_sigma");
    c.apply_prob = rc.real("transform.apply_prob");
    c.validate(kCanonicalLength);
    return c;
}

void declare_pretrain(RunConfig& rc) {
    const PretrainConfig d;
    declare_net(rc, d.net);
    declare_transforms(rc);
    rc.declare("sampler.subjects_per_iter", std::to_string(d.sampler.subjects_per_iter));
    rc.declare("sampler.windows_per_subject", std::to_string(d.sampler.windows_per_subject));
    rc.declare("sampler.intensity_floor", num(d.sampler.intensity_floor));
    rc.declare("sampler.weighted", d.sampler.weighted ? "true" : "false", "intensity-weighted window sampling");
    rc.declare("sampler.data_ratio", num(d.sampler.data_ratio));
    rc.declare("pretrain.epochs", std::to_string(d.epochs));
    rc.declare("pretrain.base_lr", num(d.base_lr));
    rc.declare("pretrain.patience", std::to_string(d.patience));
    rc.declare("pretrain.test_fraction", num(d.test_fraction));
    rc.declare("pretrain.max_eval_batches", std::to_string(d.max_eval_batches));
}

PretrainConfig read_pretrain(const RunConfig& rc) {
    PretrainConfig c;
    c.net = read_net(rc);
    c.transforms = read_transforms(rc);
    c.sampler.subjects_per_iter = static_cast<int>(rc.integer("sampler.subjects_per_iter"));
    c.sampler.windows_per_subject = static_cast<int>(rc.integer("sampler.windows_per_subject"));
    c.sampler.intensity_floor = rc.real("sampler.intensity_floor");
    c.sampler.weighted = rc.boolean("sampler.weighted");
    c.sampler.data_ratio = rc.real("sampler.data_ratio");
    c.epochs = static_cast<int>(rc.integer("pretrain.epochs"));
    c.base_lr = rc.real("pretrain.base_lr");
    c.patience = static_cast<int>(rc.integer("pretrain.patience"));
    c.test_fraction = rc.real("pretrain.test_fraction");
    c.max_eval_batches = static_cast<int>(rc.integer("pretrain.max_eval_batches"));
    c.validate();
    return c;
}

void declare_train(RunConfig& rc) {
    const TrainConfig d;
    rc.declare("train.max_epochs", std::to_string(d.max_epochs));
    rc.declare("train.batch_size", std::to_string(d.batch_size));
    rc.declare("train.base_lr", num(d.base_lr));
    rc.declare("train.patience", std::to_string(d.patience));
}

TrainConfig read_train(const RunConfig& rc) {
    TrainConfig c;
    c.max_epochs = static_cast<int>(rc.integer("train.max_epochs"));
    c.batch_size = static_cast<int>(rc.integer("train.batch_size"));
    c.base_lr = rc.real("train.base_lr");
    c.patience = static_cast<int>(rc.integer("train.patience"));
    c.validate();
    return c;
}

void declare_forest(RunConfig& rc) {
    const ForestConfig d;
    rc.declare("forest.n_trees", std::to_string(d.n_trees));
    rc.declare("forest.max_features", std::to_string(d.max_features));
    rc.declare("forest.min_leaf", std::to_string(d.min_leaf));
    rc.declare("forest.bootstrap", d.bootstrap ? "true" : "false");
}

ForestConfig read_forest(const RunConfig& rc) {
    ForestConfig c;
    c.n_trees = static_cast<int>(rc.integer("forest.n_trees"));
    c.max_features = static_cast<int>(rc.integer("forest.max_features"));
    c.min_leaf = static_cast<int>(rc.integer("forest.min_leaf"));
    c.bootstrap = rc.boolean("forest.bootstrap");
    if (c.n_trees < 1 || c.max_features < 1 || c.min_leaf < 1)
        throw ConfigError("forest n_trees, max_features and min_leaf must be >= 1");
    return c;
}

void declare_lrp(RunConfig& rc) {
    const explain::LrpConfig d;
    rc.declare("lrp.gamma", num(d.gamma));
    rc.declare("lrp.epsilon", fmt::format("{},{},{}", d.epsilon[0], d.epsilon[1], d.epsilon[2]),
               "ascending epsilons for the middle stages");
    rc.declare("lrp.uniform_epsilon", num(d.uniform_epsilon));
    rc.declare("lrp.ig_steps", std::to_string(d.ig_steps));
}

explain::LrpConfig read_lrp(const RunConfig& rc) {
    explain::LrpConfig c;
    c.gamma = rc.real("lrp.gamma");
    const auto parts = split(rc.str("lrp.epsilon"), ',');
    if (parts.size() != c.epsilon.size()) throw ConfigError("lrp.epsilon needs three comma-separated values");
    for (std::size_t i = 0; i < parts.size(); ++i) c.epsilon[i] = parse_number<double>("lrp.epsilon", trim(parts[i]));
    c.uniform_epsilon = rc.real("lrp.uniform_epsilon");
    c.ig_steps = static_cast<int>(rc.integer("lrp.ig_steps"));
    c.validate();
    return c;
}

std::string format_synth_classes(const std::vector<SynthClass>& classes) {
    std::string out;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& c = classes[i];
        if (i) out += ';';
        out += fmt::format("{}:{}:{}:", c.name, c.fundamental_hz, c.sawtooth_amp);
        for (std::size_t k = 0; k < c.harmonics.size(); ++k) out += fmt::format("{}{}", k ? "/" : "", c.harmonics[k]);
        out += fmt::format(":{}", c.noise_std);
    }
    return out;
}

std::vector<SynthClass> parse_synth_classes(std::string_view text) {
    std::vector<SynthClass> out;
    for (auto item : split(text, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto f = split(item, ':');
        if (f.size() != 5) throw ConfigError(fmt::format("synth class '{}' needs name:hz:saw:harmonics:noise", item));
        SynthClass c;
        c.name = std::string(trim(f[0]));
        c.fundamental_hz = parse_number<double>("synth.classes", trim(f[1]));
        c.sawtooth_amp = parse_number<double>("synth.classes", trim(f[2]));
        if (!trim(f[3]).empty())
            for (auto h : split(trim(f[3]), '/')) c.harmonics.push_back(parse_number<double>("synth.classes", trim(h)));
        c.noise_std = parse_number<double>("synth.classes", trim(f[4]));
        out.push_back(std::move(c));
    }
    if (out.empty()) throw ConfigError("synth.classes is empty");
    return out;
}

void declare_synth(RunConfig& rc) {
    const auto d = SynthSpec::standard();
    rc.declare("synth.n_subjects", std::to_string(d.n_subjects));
    rc.declare("synth.days_per_subject", std::to_string(d.days_per_subject));
    rc.declare("synth.windows_per_day", std::to_string(d.windows_per_day));
    rc.declare("synth.classes", format_synth_classes(d.classes), "name:hz:sawtooth:h1/h2/..:noise;...");
    rc.declare("synth.static_fraction", num(d.static_fraction));
    rc.declare("synth.gain_jitter", num(d.gain_jitter));
    rc.declare("synth.freq_jitter", num(d.freq_jitter));
    rc.declare("synth.drift_amp", num(d.drift_amp));
    rc.declare("synth.envelope_depth", num(d.envelope_depth));
    rc.declare("synth.labelled", d.labelled ? "true" : "false");
}

SynthSpec read_synth(const RunConfig& rc) {
    auto s = SynthSpec::standard();
    s.n_subjects = static_cast<int>(rc.integer("synth.n_subjects"));
    s.days_per_subject = static_cast<int>(rc.integer("synth.days_per_subject"));
    s.windows_per_day = static_cast<int>(rc.integer("synth.windows_per_day"));
    s.classes = parse_synth_classes(rc.str("synth.classes"));
    s.static_fraction = rc.real("synth.static_fraction");
    s.gain_jitter = rc.real("synth.gain_jitter");
    s.freq_jitter = rc.real("synth.freq_jitter");
    s.drift_amp = rc.real("synth.drift_amp");
    s.envelope_depth = rc.real("synth.envelope_depth");
    s.labelled = rc.boolean("synth.labelled");
    s.validate();
    return s;
}

} // namespace har
