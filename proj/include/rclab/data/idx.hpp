#pragma once

#include <cstdint>
#include <filesystem>

#include "rclab/data/dataset.hpp"

namespace rclab::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

// Reads an IDX image/label file pair (unsigned byte, big-endian header).
// Pixels are mapped from [0,255] to [-1,1]; labels become Labeled conditions.
PairedDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Writes a dataset of [1,H,W] items in IDX form, mapping [-1,1] back to bytes.
void save_idx(const PairedDataset& d, const std::filesystem::path& images, const std::filesystem::path& labels);

}  // namespace rclab::data
