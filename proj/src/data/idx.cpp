#include "rclab/data/idx.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "rclab/util/binary_io.hpp"

namespace rclab::data {

namespace {

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", v);
  return buf;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::filesystem::path& path) {
  if (b.size() < off + 4) throw FormatError("IDX file '" + path.string() + "' is truncated in its header");
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) | (std::uint32_t(b[off + 2]) << 8) |
         std::uint32_t(b[off + 3]);
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

}  // namespace

PairedDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto ib = util::read_file(images);
  const auto lb = util::read_file(labels);
  const std::uint32_t im = be32(ib, 0, images);
  if (im != kIdxImageMagic) {
    throw FormatError("IDX image file '" + images.string() + "' has magic " + hex(im) + ", expected " +
                      hex(kIdxImageMagic));
  }
  const std::uint32_t lm = be32(lb, 0, labels);
  if (lm != kIdxLabelMagic) {
    throw FormatError("IDX label file '" + labels.string() + "' has magic " + hex(lm) + ", expected " +
                      hex(kIdxLabelMagic));
  }
  const std::size_t count = be32(ib, 4, images);
  const std::size_t rows = be32(ib, 8, images);
  const std::size_t cols = be32(ib, 12, images);
  const std::size_t label_count = be32(lb, 4, labels);
  if (count != label_count) {
    throw FormatError("IDX image count " + std::to_string(count) + " differs from label count " +
                      std::to_string(label_count));
  }
  if (rows == 0 || cols == 0) throw FormatError("IDX images have a zero dimension");
  if (ib.size() < 16 + count * rows * cols) throw FormatError("IDX image payload is truncated");
  if (lb.size() < 8 + count) throw FormatError("IDX label payload is truncated");

  PairedDataset d;
  d.item_shape = {1, rows, cols};
  d.provenance = Provenance::Real;
  d.pixels.reserve(count * rows * cols);
  std::vector<float> item(rows * cols);
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t k = 0; k < item.size(); ++k) {
      item[k] = static_cast<float>(ib[16 + n * item.size() + k]) / 255.0f * 2.0f - 1.0f;
    }
    d.push_back(item, Condition::labeled(lb[8 + n]));
  }
  return d;
}

void save_idx(const PairedDataset& d, const std::filesystem::path& images, const std::filesystem::path& labels) {
  if (d.item_shape.size() != 3 || d.item_shape[0] != 1) throw ArgumentError("save_idx needs [1,H,W] items");
  std::vector<unsigned char> ib, lb;
  put_be32(ib, kIdxImageMagic);
  put_be32(ib, static_cast<std::uint32_t>(d.size()));
  put_be32(ib, static_cast<std::uint32_t>(d.item_shape[1]));
  put_be32(ib, static_cast<std::uint32_t>(d.item_shape[2]));
  for (float v : d.pixels) {
    ib.push_back(static_cast<unsigned char>(std::lround(std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f) * 255.0f)));
  }
  put_be32(lb, kIdxLabelMagic);
  put_be32(lb, static_cast<std::uint32_t>(d.size()));
  for (const auto& c : d.conditions) lb.push_back(static_cast<unsigned char>(c.class_id));
  util::write_file(images, ib);
  util::write_file(labels, lb);
}

}  // namespace rclab::data
