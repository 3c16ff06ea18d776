#include "rclab/cli/sample_sheet.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "rclab/errors.hpp"
#include "rclab/util/binary_io.hpp"

namespace rclab::cli {

void emit_sample_sheet(const num::Tensor& images, std::size_t rows, std::size_t cols,
                       const std::filesystem::path& path) {
  const auto& s = images.shape();
  const bool channel = s.size() == 4;
  if (!(s.size() == 3 || (channel && s[1] == 1))) {
    throw ShapeError("sample sheet needs [n, H, W] or [n, 1, H, W] images, got " + num::shape_string(s));
  }
  const std::size_t n = s[0];
  const std::size_t h = s[s.size() - 2];
  const std::size_t w = s[s.size() - 1];
  if (n > rows * cols) {
    throw ArgumentError("sample sheet of " + std::to_string(rows) + "x" + std::to_string(cols) + " cannot hold " +
                        std::to_string(n) + " images");
  }
  const std::size_t width = cols * w;
  const std::size_t height = rows * h;
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const std::size_t base = out.size();
  out.resize(base + width * height, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t r0 = (k / cols) * h;
    const std::size_t c0 = (k % cols) * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const float v = std::clamp(images[(k * h + y) * w + x], -1.0f, 1.0f);
        out[base + (r0 + y) * width + c0 + x] = static_cast<unsigned char>(std::lround((v + 1.0f) * 127.5f));
      }
    }
  }
  util::write_file(path, out);
}

Graymap read_graymap(const std::filesystem::path& path) {
  const auto bytes = util::read_file(path);
  // Header tokens are whitespace separated; exactly one whitespace byte
  // precedes the raster.
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  Graymap g;
  if (token() != "P5") throw FormatError("'" + path.string() + "' is not a binary graymap");
  try {
    g.width = std::stoul(token());
    g.height = std::stoul(token());
    g.maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw FormatError("'" + path.string() + "' has a malformed graymap header");
  }
  if (g.maxval <= 0 || g.maxval > 255) throw FormatError("graymap maxval must lie in [1, 255]");
  ++pos;
  if (bytes.size() < pos + g.width * g.height) throw CorruptionError("'" + path.string() + "' raster is truncated");
  g.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                  bytes.begin() + static_cast<std::ptrdiff_t>(pos + g.width * g.height));
  return g;
}

}  // namespace rclab::cli
