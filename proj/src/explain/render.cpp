#include "har/explain/render.hpp"

#include "har/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace har::explain {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError(fmt::format("cannot write {}", path.string()));
    return f;
}

// Blue-white-red for signed values in [-1, 1].
std::string diverging(double v) {
    v = std::clamp(v, -1.0, 1.0);
    const auto ch = [](double x) { return static_cast<int>(std::lround(255.0 * x)); };
    if (v >= 0.0) return fmt::format("rgb(255,{},{})", ch(1.0 - v), ch(1.0 - v));
    return fmt::format("rgb({},{},255)", ch(1.0 + v), ch(1.0 + v));
}

// Dark-to-yellow ramp for magnitudes in [0, 1].
std::string sequential(double v) {
    v = std::clamp(v, 0.0, 1.0);
    const auto r = static_cast<int>(std::lround(20 + 235 * v));
    const auto g = static_cast<int>(std::lround(10 + 210 * std::sqrt(v)));
    const auto b = static_cast<int>(std::lround(60 * (1.0 - v)));
    return fmt::format("rgb({},{},{})", r, g, b);
}

} // namespace

void write_relevance_csv(const std::filesystem::path& path, const RelevanceMap& map) {
    auto f = open_out(path);
    f << "t,channel,value\n";
    for (std::size_t t = 0; t < map.T; ++t)
        for (std::size_t c = 0; c < map.C; ++c) f << fmt::format("{},{},{:.17g}\n", t, c, map.at(c, t));
}

void write_scalogram_csv(const std::filesystem::path& path, const Scalogram& s) {
    auto f = open_out(path);
    f << "t,frequency_hz,value\n";
    if (s.magnitudes.empty()) return;
    const std::size_t T = s.magnitudes.front().size();
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < s.magnitudes.size(); ++k)
            f << fmt::format("{},{:.17g},{:.17g}\n", t, s.frequencies_hz[k], s.magnitudes[k][t]);
}

void write_mask_csv(const std::filesystem::path& path, std::span<const MaskCurve> curves) {
    auto f = open_out(path);
    f << "order,method,fraction,accuracy\n";
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.fractions.size(); ++i)
            f << fmt::format("{},{},{:.4f},{:.17g}\n", mask_order_name(c.order), method_name(c.method), c.fractions[i],
                             c.accuracy[i]);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto f = open_out(path);
    f << text;
}

std::string render_panel_svg(const SignalWindow& w, const Scalogram& s, const RelevanceMap& map,
                             const std::string& title) {
    const std::size_t T = w.length();
    constexpr double width = 900, left = 60, plot_w = width - left - 20;
    constexpr double trace_h = 160, scal_h = 140, rel_h = 40, gap = 30, top = 40;
    const double height = top + trace_h + gap + scal_h + gap + rel_h + 30;
    const double dx = plot_w / static_cast<double>(std::max<std::size_t>(T, 1));
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{}\" y=\"20\" font-size=\"14\">{}</text>\n",
        width, height, left, title);

    // Acceleration trace.
    double lo = 0.0, hi = 0.0;
    if (!w.samples().empty()) {
        const auto [mn, mx] = std::minmax_element(w.samples().begin(), w.samples().end());
        lo = *mn;
        hi = *mx;
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    static constexpr const char* colors[] = {"#d62728", "#2ca02c", "#1f77b4"};
    svg += fmt::format("<text x=\"4\" y=\"{}\">accel (g)</text>\n", top + trace_h / 2);
    for (int c = 0; c < kChannels; ++c) {
        svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"", colors[c]);
        for (std::size_t t = 0; t < T; ++t) {
            const double y = top + trace_h * (1.0 - (w.at(c, t) - lo) / (hi - lo));
            svg += fmt::format("{:.1f},{:.1f} ", left + dx * static_cast<double>(t), y);
        }
        svg += "\"/>\n";
    }

    // Scalogram, highest frequency on top.
    const double sy = top + trace_h + gap;
    svg += fmt::format("<text x=\"4\" y=\"{}\">CWT</text>\n", sy + scal_h / 2);
    double smax = 0.0;
    for (const auto& row : s.magnitudes)
        for (double v : row) smax = std::max(smax, v);
    if (smax <= 0.0) smax = 1.0;
    const std::size_t K = s.magnitudes.size();
    const double dy = K ? scal_h / static_cast<double>(K) : 0.0;
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < s.magnitudes[k].size(); ++t)
            svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                               left + dx * static_cast<double>(t), sy + dy * static_cast<double>(k), dx + 0.05,
                               dy + 0.05, sequential(s.magnitudes[k][t] / smax));
    if (K) {
        svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{:.1f} Hz</text>\n", left - 55, sy + 10,
                           s.frequencies_hz.front());
        svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{:.1f} Hz</text>\n", left - 55, sy + scal_h,
                           s.frequencies_hz.back());
    }

    // Relevance strip.
    const double ry = sy + scal_h + gap;
    svg += fmt::format("<text x=\"4\" y=\"{}\">{}</text>\n", ry + rel_h / 2 + 4, method_name(map.method));
    const auto rel = map.per_timestep();
    double rmax = 0.0;
    for (double v : rel) rmax = std::max(rmax, std::abs(v));
    if (rmax <= 0.0) rmax = 1.0;
    for (std::size_t t = 0; t < rel.size(); ++t)
        svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.2f}\" height=\"{}\" fill=\"{}\"/>\n",
                           left + dx * static_cast<double>(t), ry, dx + 0.05, rel_h, diverging(rel[t] / rmax));
    svg += fmt::format("<text x=\"{}\" y=\"{}\">time (s), 0 to {:.1f}</text>\n", left, ry + rel_h + 20,
                       w.duration_s());
    svg += "</svg>\n";
    return svg;
}

} // namespace har::explain
