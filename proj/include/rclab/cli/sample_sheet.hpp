#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "rclab/num/tensor.hpp"

namespace rclab::cli {

// Tiles single-channel images [n, (1,) H, W] row-major into a rows x cols
// grid and writes a binary P5 graymap, mapping [-1, 1] affinely onto
// [0, 255]. Unused cells stay black.
void emit_sample_sheet(const num::Tensor& images, std::size_t rows, std::size_t cols,
                       const std::filesystem::path& path);

struct Graymap {
  std::size_t width = 0;
  std::size_t height = 0;
  int maxval = 0;
  std::vector<unsigned char> pixels;
};

// Reads a binary P5 graymap with maxval <= 255.
Graymap read_graymap(const std::filesystem::path& path);

}  // namespace rclab::cli
