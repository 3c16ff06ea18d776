#include "rclab/util/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rclab/errors.hpp"

namespace rclab::util {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("failed writing '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_container(const std::filesystem::path& path, std::string_view magic, const std::string& header,
                     std::span<const unsigned char> payload) {
  std::vector<unsigned char> out(magic.begin(), magic.end());
  const auto len = static_cast<std::uint32_t>(header.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  write_file(path, out);
}

Container read_container(const std::filesystem::path& path, std::string_view magic) {
  const auto bytes = read_file(path);
  if (bytes.size() < magic.size() || !std::equal(magic.begin(), magic.end(), bytes.begin())) {
    throw FormatError("'" + path.string() + "' does not start with magic \"" + std::string(magic) + "\"");
  }
  if (bytes.size() < magic.size() + 4) throw CorruptionError("'" + path.string() + "' is truncated");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= std::uint32_t(bytes[magic.size() + i]) << (8 * i);
  const std::size_t start = magic.size() + 4;
  if (bytes.size() < start + len) throw CorruptionError("'" + path.string() + "' header is truncated");
  Container c;
  c.header.assign(bytes.begin() + start, bytes.begin() + start + len);
  c.payload.assign(bytes.begin() + start + len, bytes.end());
  return c;
}

void append_f32_le(std::vector<unsigned char>& out, std::span<const float> values) {
  for (float v : values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
  }
}

std::vector<float> parse_f32_le(std::span<const unsigned char> bytes) {
  if (bytes.size() % 4 != 0) throw CorruptionError("float payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= std::uint32_t(bytes[4 * k + i]) << (8 * i);
    out[k] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace rclab::util
