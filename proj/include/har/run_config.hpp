#pragma once

#include "har/downstream.hpp"
#include "har/explain/attribution.hpp"
#include "har/forest.hpp"
#include "har/nn/network.hpp"
#include "har/ssl.hpp"
#include "har/synth.hpp"
#include "har/transforms.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace har {

/// Flat key=value configuration with a declared schema. Keys are dotted
/// ("net.width_base"); lines starting with '#' are comments. Assigning an
/// undeclared key is a ConfigError.
class RunConfig {
public:
    void declare(std::string key, std::string default_value, std::string help = {});
    bool declared(std::string_view key) const { return entries_.contains(std::string(key)); }

    void load_file(const std::filesystem::path& path);
    /// Parses "key=value".
    void assign(std::string_view assignment);
    void set(std::string_view key, std::string value);

    const std::string& str(std::string_view key) const;
    long long integer(std::string_view key) const;
    std::uint64_t u64(std::string_view key) const;
    double real(std::string_view key) const;
    bool boolean(std::string_view key) const;

    /// Sorted "key = value" lines.
    std::string resolved() const;
    void write_resolved(const std::filesystem::path& path) const;
    /// "key (default): help" lines for --help output.
    std::string describe() const;

private:
    struct Entry {
        std::string value, default_value, help;
    };
    const Entry& entry(std::string_view key) const;
    std::map<std::string, Entry> entries_;
};

void declare_net(RunConfig& rc, const nn::NetConfig& d = nn::NetConfig::tiny());
nn::NetConfig read_net(const RunConfig& rc);

void declare_transforms(RunConfig& rc);
TransformConfig read_transforms(const RunConfig& rc);

void declare_pretrain(RunConfig& rc);
PretrainConfig read_pretrain(const RunConfig& rc);

void declare_train(RunConfig& rc);
TrainConfig read_train(const RunConfig& rc);

void declare_forest(RunConfig& rc);
ForestConfig read_forest(const RunConfig& rc);

void declare_lrp(RunConfig& rc);
explain::LrpConfig read_lrp(const RunConfig& rc);

/// Classes as "name:fundamental_hz:sawtooth_amp:h1/h2/...:noise_std", ';'-separated.
std::string format_synth_classes(const std::vector<SynthClass>& classes);
std::vector<SynthClass> parse_synth_classes(std::string_view text);

void declare_synth(RunConfig& rc);
SynthSpec read_synth(const RunConfig& rc);

} // namespace har
