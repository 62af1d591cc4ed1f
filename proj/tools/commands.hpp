#pragma once

#include "har/run_config.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace har::cli {

struct Command {
    std::string name;
    std::string summary;
    std::function<void(RunConfig&)> declare;
    std::function<void(const RunConfig&, const std::filesystem::path& out)> run;
};

const std::vector<Command>& commands();

/// Parses "1,2,5" or a decade range "lo..hi" (lo, 10*lo, ... <= hi).
std::vector<int> parse_counts(std::string_view text);

} // namespace har::cli
