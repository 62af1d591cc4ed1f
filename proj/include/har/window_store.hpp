#pragma once

#include "har/signal.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace har {

/// Per-window metadata. label == -1 marks an unlabelled window.
struct WindowMeta {
    std::string subject_id;
    std::uint16_t day_index = 0;
    std::int32_t label = -1;
    float intensity = 0.0f;
};

/// One materialized record of a store.
struct WindowRecord {
    SignalWindow window;
    std::string subject_id;
    int day_index = 0;
    std::optional<int> label;
    double intensity = 0.0;
};

/// In-memory collection of windows with subject/day/label/intensity metadata.
///
/// Samples are held as 32-bit floats, which is exactly what the on-disk
/// format stores, so a save/load round trip is lossless. A store is either
/// fully labelled or fully unlabelled.
///
/// File layout (all integers and floats little-endian):
///   "HARW" | version u16 | count u64 | T u32 | rate u32
///   count x (3 x T f32, channel-major)
///   count x (id_len u16 | id bytes (UTF-8) | day u16 | label i32 | intensity f32)
class WindowStore {
public:
    static constexpr std::uint16_t kFormatVersion = 1;

    WindowStore() = default;
    WindowStore(std::size_t length, int rate, bool labelled);

    std::size_t size() const noexcept { return meta_.size(); }
    bool empty() const noexcept { return meta_.empty(); }
    std::size_t length() const noexcept { return length_; }
    int rate() const noexcept { return rate_; }
    bool labelled() const noexcept { return labelled_; }

    /// Appends a window; its samples are rounded to float and the intensity
    /// is computed from the rounded values.
    void append(const SignalWindow& w, const std::string& subject_id, int day_index,
                std::optional<int> label = std::nullopt);

    SignalWindow window(std::size_t i) const;
    WindowRecord record(std::size_t i) const;
    std::span<const float> raw(std::size_t i) const {
        return {data_.data() + i * kChannels * length_, kChannels * length_};
    }
    const WindowMeta& meta(std::size_t i) const { return meta_[i]; }
    const std::vector<WindowMeta>& metas() const noexcept { return meta_; }

    /// Sorted unique subject ids.
    std::vector<std::string> subjects() const;
    /// Window indices grouped by subject then day, in store order.
    std::map<std::string, std::map<int, std::vector<std::size_t>>> index() const;

    /// New store holding the listed windows (in the given order).
    WindowStore subset(std::span<const std::size_t> indices) const;
    /// Copy with labels dropped.
    WindowStore unlabelled_copy() const;

    void save(const std::filesystem::path& path) const;
    static WindowStore load(const std::filesystem::path& path);

private:
    std::size_t length_ = kCanonicalLength;
    int rate_ = kCanonicalRate;
    bool labelled_ = false;
    std::vector<float> data_;
    std::vector<WindowMeta> meta_;
};

/// Parsed accelerometer CSV: columns time,x,y,z[,label] with a header row.
struct CsvRecording {
    RawRecording recording;
    std::vector<int> labels; // empty when the file has no label column
};

CsvRecording read_accel_csv(const std::filesystem::path& path, double rate, bool require_label);

/// Source file description for ingestion.
struct IngestSource {
    std::filesystem::path path;
    std::string subject_id;
    int day_index = 0;
};

/// Parses "path,subject_id,day" manifest lines (header row optional).
std::vector<IngestSource> read_manifest(const std::filesystem::path& manifest);

/// Resample to 30 Hz, segment to 10 s windows, compute intensities. A
/// labelled ingest assigns each window the majority per-sample label
/// (ties to the smaller id); labels are carried through resampling by
/// nearest source sample.
WindowStore ingest_csv(std::span<const IngestSource> sources, double rate, bool labelled);

} // namespace har
