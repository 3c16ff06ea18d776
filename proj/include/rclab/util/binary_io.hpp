#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rclab::util {

// Container layout shared by checkpoints and caches:
//   magic bytes | u32 little-endian header length | header text | payload
struct Container {
  std::string header;
  std::vector<unsigned char> payload;
};

void write_container(const std::filesystem::path& path, std::string_view magic, const std::string& header,
                     std::span<const unsigned char> payload);

// Throws FormatError on a magic mismatch, CorruptionError when the file is
// shorter than its header length claims.
Container read_container(const std::filesystem::path& path, std::string_view magic);

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// Little-endian float32 (de)serialization.
void append_f32_le(std::vector<unsigned char>& out, std::span<const float> values);
std::vector<float> parse_f32_le(std::span<const unsigned char> bytes);

}  // namespace rclab::util
