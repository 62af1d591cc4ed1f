#include "har/window_store.hpp"

#include "har/binary_io.hpp"
#include "har/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace har {

WindowStore::WindowStore(std::size_t length, int rate, bool labelled)
    : length_(length), rate_(rate), labelled_(labelled) {}

void WindowStore::append(const SignalWindow& w, const std::string& subject_id, int day_index,
                         std::optional<int> label) {
    if (w.length() != length_)
        throw InputError(fmt::format("window length {} does not match store length {}", w.length(),
                                     length_));
    if (label.has_value() != labelled_)
        throw InputError(labelled_ ? "labelled store requires a label" : "unlabelled store got a label");
    if (label && *label < 0) throw InputError("labels must be non-negative");
    if (day_index < 0 || day_index > 0xFFFF) throw InputError("day index out of u16 range");
    w.validate();

    SignalWindow rounded(length_, rate_);
    const std::size_t base = data_.size();
    data_.resize(base + kChannels * length_);
    for (std::size_t i = 0; i < kChannels * length_; ++i) {
        const auto f = static_cast<float>(w.samples()[i]);
        data_[base + i] = f;
        rounded.samples()[i] = f;
    }
    WindowMeta m;
    m.subject_id = subject_id;
    m.day_index = static_cast<std::uint16_t>(day_index);
    m.label = label.value_or(-1);
    m.intensity = static_cast<float>(window_intensity(rounded));
    meta_.push_back(std::move(m));
}

SignalWindow WindowStore::window(std::size_t i) const {
    const auto r = raw(i);
    return SignalWindow(std::vector<double>(r.begin(), r.end()), rate_);
}

WindowRecord WindowStore::record(std::size_t i) const {
    WindowRecord rec;
    rec.window = window(i);
    rec.subject_id = meta_[i].subject_id;
    rec.day_index = meta_[i].day_index;
    if (meta_[i].label >= 0) rec.label = meta_[i].label;
    rec.intensity = meta_[i].intensity;
    return rec;
}

std::vector<std::string> WindowStore::subjects() const {
    std::set<std::string> ids;
    for (const auto& m : meta_) ids.insert(m.subject_id);
    return {ids.begin(), ids.end()};
}

std::map<std::string, std::map<int, std::vector<std::size_t>>> WindowStore::index() const {
    std::map<std::string, std::map<int, std::vector<std::size_t>>> out;
    for (std::size_t i = 0; i < meta_.size(); ++i) out[meta_[i].subject_id][meta_[i].day_index].push_back(i);
    return out;
}

WindowStore WindowStore::subset(std::span<const std::size_t> indices) const {
    WindowStore out(length_, rate_, labelled_);
    out.data_.reserve(indices.size() * kChannels * length_);
    out.meta_.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= size()) throw InputError("subset index out of range");
        const auto r = raw(i);
        out.data_.insert(out.data_.end(), r.begin(), r.end());
        out.meta_.push_back(meta_[i]);
    }
    return out;
}

WindowStore WindowStore::unlabelled_copy() const {
    WindowStore out = *this;
    out.labelled_ = false;
    for (auto& m : out.meta_) m.label = -1;
    return out;
}

void WindowStore::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError(fmt::format("cannot open {} for writing", path.string()));
    binio::put_magic(os, "HARW");
    binio::put_uint(os, kFormatVersion);
    binio::put_uint(os, static_cast<std::uint64_t>(size()));
    binio::put_uint(os, static_cast<std::uint32_t>(length_));
    binio::put_uint(os, static_cast<std::uint32_t>(rate_));
    for (float v : data_) binio::put_f32(os, v);
    for (const auto& m : meta_) {
        binio::put_string16(os, m.subject_id);
        binio::put_uint(os, m.day_index);
        binio::put_i32(os, m.label);
        binio::put_f32(os, m.intensity);
    }
    if (!os) throw InputError(fmt::format("write failed for {}", path.string()));
}

WindowStore WindowStore::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InputError(fmt::format("cannot open {}", path.string()));
    binio::expect_magic(is, "HARW", "window store");
    const auto version = binio::get_uint<std::uint16_t>(is);
    if (version != kFormatVersion)
        throw InputError(fmt::format("unsupported window store version {}", version));
    const auto count = binio::get_uint<std::uint64_t>(is);
    const auto T = binio::get_uint<std::uint32_t>(is);
    const auto rate = binio::get_uint<std::uint32_t>(is);
    if (T == 0 || rate == 0) throw InputError("window store header has zero length or rate");

    WindowStore out(T, static_cast<int>(rate), false);
    out.data_.resize(count * kChannels * T);
    for (auto& v : out.data_) v = binio::get_f32(is);
    out.meta_.resize(count);
    std::size_t n_labelled = 0;
    for (auto& m : out.meta_) {
        m.subject_id = binio::get_string16(is);
        m.day_index = binio::get_uint<std::uint16_t>(is);
        m.label = binio::get_i32(is);
        m.intensity = binio::get_f32(is);
        if (m.label >= 0) ++n_labelled;
        else if (m.label != -1) throw InputError("invalid label in window store");
    }
    if (n_labelled != 0 && n_labelled != count)
        throw InputError("window store mixes labelled and unlabelled windows");
    out.labelled_ = count > 0 && n_labelled == count;
    return out;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, int& out) {
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

} // namespace

CsvRecording read_accel_csv(const std::filesystem::path& path, double rate, bool require_label) {
    std::ifstream is(path);
    if (!is) throw InputError(fmt::format("cannot open {}", path.string()));
    std::string line;
    if (!std::getline(is, line)) throw InputError(fmt::format("{}: empty file", path.string()));
    const auto header = split_csv(line);
    const bool has_label = header.size() >= 5 && header[4] == "label";
    if (header.size() < 4 || header[0] != "time" || header[1] != "x" || header[2] != "y" || header[3] != "z")
        throw InputError(fmt::format("{}:1: expected header time,x,y,z[,label]", path.string()));
    if (require_label && !has_label)
        throw InputError(fmt::format("{}: labelled ingest requires a 'label' column", path.string()));

    CsvRecording out;
    out.recording.rate = rate;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != header.size())
            throw InputError(fmt::format("{}:{}: expected {} fields, got {}", path.string(), lineno,
                                         header.size(), f.size()));
        double v[4];
        for (int k = 0; k < 4; ++k)
            if (!parse_double(f[k], v[k]) || !std::isfinite(v[k]))
                throw InputError(fmt::format("{}:{}: malformed value '{}'", path.string(), lineno, f[k]));
        for (int c = 0; c < kChannels; ++c) out.recording.channels[c].push_back(v[c + 1]);
        if (has_label) {
            int lab = 0;
            if (!parse_int(f[4], lab) || lab < 0)
                throw InputError(fmt::format("{}:{}: malformed label '{}'", path.string(), lineno, f[4]));
            out.labels.push_back(lab);
        }
    }
    if (!require_label) out.labels.clear();
    return out;
}

std::vector<IngestSource> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw InputError(fmt::format("cannot open manifest {}", manifest.string()));
    std::vector<IngestSource> out;
    std::string line;
    std::size_t lineno = 0;
    const auto base = manifest.parent_path();
    while (std::getline(is, line)) {
        ++lineno;
        const auto f = split_csv(line);
        if (f.empty() || (f.size() == 1 && f[0].empty())) continue;
        if (lineno == 1 && f[0] == "path") continue;
        if (f.size() < 2)
            throw InputError(fmt::format("{}:{}: expected path,subject_id[,day]", manifest.string(), lineno));
        IngestSource src;
        src.path = std::filesystem::path(std::string(f[0]));
        if (src.path.is_relative()) src.path = base / src.path;
        src.subject_id = std::string(f[1]);
        if (f.size() >= 3 && !parse_int(f[2], src.day_index))
            throw InputError(fmt::format("{}:{}: malformed day '{}'", manifest.string(), lineno, f[2]));
        out.push_back(std::move(src));
    }
    return out;
}

WindowStore ingest_csv(std::span<const IngestSource> sources, double rate, bool labelled) {
    WindowStore store(kCanonicalLength, kCanonicalRate, labelled);
    for (const auto& src : sources) {
        auto csv = read_accel_csv(src.path, rate, labelled);
        csv.recording.subject_id = src.subject_id;
        csv.recording.day_index = src.day_index;
        const auto resampled = resample_linear(csv.recording, kCanonicalRate);
        const auto windows = segment_windows(resampled, kCanonicalDurationS);

        std::vector<int> labels;
        if (labelled) {
            const std::size_t N = csv.labels.size(), M = resampled.length();
            labels.resize(M);
            for (std::size_t i = 0; i < M; ++i) {
                const double pos = M > 1 ? static_cast<double>(i) * (N - 1) / (M - 1) : 0.0;
                labels[i] = csv.labels[std::min(N - 1, static_cast<std::size_t>(std::lround(pos)))];
            }
        }
        for (std::size_t k = 0; k < windows.size(); ++k) {
            std::optional<int> label;
            if (labelled) {
                std::map<int, int> counts;
                for (std::size_t t = 0; t < kCanonicalLength; ++t) ++counts[labels[k * kCanonicalLength + t]];
                int best = -1, best_count = -1;
                for (const auto& [lab, n] : counts)
                    if (n > best_count) best = lab, best_count = n;
                label = best;
            }
            store.append(windows[k], src.subject_id, src.day_index, label);
        }
    }
    return store;
}

} // namespace har
