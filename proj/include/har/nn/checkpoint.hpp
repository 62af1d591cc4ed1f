#pragma once

#include "har/nn/adam.hpp"
#include "har/nn/network.hpp"

#include <cstdint>
#include <filesystem>

namespace har::nn {

/// Network parameters (including BN running statistics), optimizer state
/// and seed.
///
/// Layout, little-endian:
///   "HARC" | version u16
///   width_base, n_stages, blocks_per_stage, feature_dim, kernel_size,
///   input_T, head_hidden, downstream_classes (i32 each)
///   n_params u32, then per parameter:
///     name (u16 length + bytes) | trainable u8 | ndim u8 | dims u32... | f32 values
///   adam step u64 | per parameter: m f32 values, v f32 values
///   seed u64
struct Checkpoint {
    static constexpr std::uint16_t kFormatVersion = 1;

    Network<float> net;
    AdamState<float> adam;
    std::uint64_t seed = 0;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

} // namespace har::nn
