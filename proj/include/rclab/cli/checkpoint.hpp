#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "rclab/eval/classifier.hpp"
#include "rclab/models/denoiser.hpp"

namespace rclab::cli {

// magic "RCKD1" | u32 LE header length | JSON header | LE float32 payload.
// The header carries version, spec, tensor table and training metadata.
inline constexpr std::string_view kCheckpointMagic = "RCKD1";
inline constexpr int kCheckpointVersion = 1;

// Fidelity classifiers use the same layout under their own magic.
inline constexpr std::string_view kClassifierMagic = "RCCL1";
inline constexpr int kClassifierVersion = 1;

struct CheckpointMeta {
  std::string role;
  std::uint64_t iterations = 0;
  std::string manifest_digest;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  int version = kCheckpointVersion;
  models::DenoiserModel model;
  CheckpointMeta meta;
};

void save_checkpoint(const models::DenoiserModel& model, const CheckpointMeta& meta, const std::filesystem::path& path);

// Rebuilds the model from the stored spec, then fills its tensors. Unknown
// versions, malformed headers and tables that disagree with the spec raise
// FormatError; short files and payload digest mismatches raise CorruptionError.
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_classifier(const eval::TrainedClassifier& c, const std::filesystem::path& path);
eval::TrainedClassifier load_classifier(const std::filesystem::path& path);

// SHA-256 of a file's bytes; the digest recorded for input artifacts.
std::string file_digest(const std::filesystem::path& path);

}  // namespace rclab::cli
