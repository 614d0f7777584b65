#pragma once

#include <filesystem>

#include "fpn/nle.hpp"

namespace fpn {

inline constexpr int kCheckpointVersion = 1;

/// Binary layout: magic "FPNCKPT\0", u32 manifest length, UTF-8 JSON manifest
/// (format version, C, B, S, sqrt(S_bar), skip gain, tensor names and shapes), then per
/// tensor: u32 name length, name, u64 element count, little-endian float32 data.
void save_checkpoint(const std::filesystem::path& path, const NleParameters& theta);

/// Validates every blob against the manifest shapes. Values come back rounded
/// to float32 precision.
NleParameters load_checkpoint(const std::filesystem::path& path);

}  // namespace fpn
