#pragma once

#include "har/explain/attribution.hpp"
#include "har/explain/cwt.hpp"
#include "har/explain/masking.hpp"
#include "har/signal.hpp"

#include <filesystem>
#include <span>
#include <string>

namespace har::explain {

/// Long format: t,channel,value.
void write_relevance_csv(const std::filesystem::path& path, const RelevanceMap& map);
/// Long format: t,frequency_hz,value.
void write_scalogram_csv(const std::filesystem::path& path, const Scalogram& s);
/// order,method,fraction,accuracy rows for every curve.
void write_mask_csv(const std::filesystem::path& path, std::span<const MaskCurve> curves);

/// Three stacked panels: acceleration trace, scalogram of the norm series,
/// and the per-timestep relevance strip.
std::string render_panel_svg(const SignalWindow& w, const Scalogram& s, const RelevanceMap& map,
                             const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace har::explain
