#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rclab/diffusion/sampler.hpp"
#include "rclab/diffusion/schedule.hpp"
#include "rclab/distill/distill.hpp"
#include "rclab/distill/teacher.hpp"
#include "rclab/eval/classifier.hpp"

namespace rclab::cli {

enum class Command { TrainTeacher, GenCache, Distill, Eval, SwapExp, Overlap, Report };

const char* command_name(Command c);
std::optional<Command> parse_command(std::string_view name);

// Manifest rejected by schema or semantic checks. `field` is the dotted path
// of the offending entry, e.g. "distill.policy.lambda".
class ManifestError : public ArgumentError {
 public:
  ManifestError(std::string field, const std::string& message)
      : ArgumentError("manifest field '" + field + "': " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Paired data. "glyphs" renders procedural digits, "idx" reads an IDX
// image/label pair, "toy2d" draws the circular Gaussian mixture.
struct DatasetSpec {
  std::string kind = "glyphs";
  std::size_t classes = 10;
  std::size_t styles = 8;
  // Examples per (class, style) cell for glyphs, per condition for toy2d.
  std::size_t per_cell = 64;
  std::size_t image_size = 16;
  // "class" keeps Labeled(c); "composite" keeps (class, style).
  std::string labels = "class";
  std::uint64_t seed = 0;
  std::string idx_images;
  std::string idx_labels;
  double radius = 4.0;
  double variance = 0.05;

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct ScheduleSpec {
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

struct StudentSection {
  models::DenoiserSpec spec;
  distill::StudentInit init = distill::StudentInit::Random;

  friend bool operator==(const StudentSection&, const StudentSection&) = default;
};

// What the student distills from: "cache" (inputs.cache) or "dataset".
// `fraction` keeps a prefix of the source; `exclude` drops classes.
struct SourceSpec {
  std::string kind = "cache";
  double fraction = 1.0;
  std::vector<std::uint32_t> exclude;

  friend bool operator==(const SourceSpec&, const SourceSpec&) = default;
};

struct CacheSpec {
  std::size_t per_condition = 256;
  std::vector<std::uint32_t> exclude;

  friend bool operator==(const CacheSpec&, const CacheSpec&) = default;
};

struct EvalSpec {
  std::size_t samples_per_condition = 64;
  // Classes reported as unseen; all others count as seen.
  std::vector<std::uint32_t> unseen;
  // Compare generated features against the dataset.
  bool frechet = false;
  // Samples per condition shown on the sheet.
  std::size_t sheet_columns = 8;

  friend bool operator==(const EvalSpec&, const EvalSpec&) = default;
};

struct SwapSpec {
  std::size_t pairs = 256;
  // Timesteps to test; empty means the full sampler grid.
  std::vector<std::size_t> grid;

  friend bool operator==(const SwapSpec&, const SwapSpec&) = default;
};

struct OverlapSpec {
  std::size_t c1 = 0;
  std::size_t c2 = 1;

  friend bool operator==(const OverlapSpec&, const OverlapSpec&) = default;
};

struct ArtifactRef {
  std::string path;
  // Empty until resolved; a nonempty value must match the file.
  std::string sha256;

  friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

// Everything a command needs. All run randomness derives from `seed`; the
// per-config seed fields are overwritten from it.
struct RunManifest {
  Command command = Command::TrainTeacher;
  std::uint64_t seed = 0;
  std::string out = "out";
  DatasetSpec dataset;
  ScheduleSpec schedule;
  models::DenoiserSpec teacher;
  distill::TeacherConfig teacher_training;
  StudentSection student;
  distill::DistillConfig distill;
  SourceSpec source;
  CacheSpec cache;
  diffusion::SamplerConfig sampler;
  EvalSpec eval;
  eval::ClassifierConfig classifier;
  SwapSpec swap;
  OverlapSpec overlap;
  std::map<std::string, ArtifactRef> inputs;

  friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

nlohmann::json manifest_json(const RunManifest& m);

// Validates `j` against the manifest schema and fills unspecified fields with
// defaults. Throws ManifestError naming the first bad field.
RunManifest parse_manifest(const nlohmann::json& j);
RunManifest load_manifest(const std::filesystem::path& path);

// Manifest text with 2-space indentation and a trailing newline.
std::string manifest_text(const RunManifest& m);

// Digest over the manifest with the output directory and input paths
// removed, so relocated reruns record the same value.
std::string manifest_digest(const RunManifest& m);

// The sections a command reads; the others are ignored.
std::vector<std::string> required_inputs(Command c);

diffusion::NoiseSchedule build_schedule(const ScheduleSpec& s);

}  // namespace rclab::cli
