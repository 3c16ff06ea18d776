#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "rclab/cli/manifest.hpp"
#include "rclab/data/dataset.hpp"

namespace rclab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitManifest = 2,
  kExitArtifact = 3,
  kExitNumeric = 4,
};

// An input artifact is missing, unreadable or fails its digest check.
class ArtifactError : public Error {
 public:
  ArtifactError(std::string artifact, const std::string& message)
      : Error("artifact '" + artifact + "': " + message), artifact_(std::move(artifact)) {}

  const std::string& artifact() const noexcept { return artifact_; }

 private:
  std::string artifact_;
};

// A failure inside a named run phase ("train", "sample", ...).
class PhaseError : public Error {
 public:
  PhaseError(std::string phase, const std::string& message, bool numeric)
      : Error("during phase '" + phase + "': " + message), phase_(std::move(phase)), numeric_(numeric) {}

  const std::string& phase() const noexcept { return phase_; }
  bool numeric() const noexcept { return numeric_; }

 private:
  std::string phase_;
  bool numeric_;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

data::PairedDataset load_dataset(const DatasetSpec& spec);

// Applies overrides, checks input artifacts and records their digests.
RunManifest resolve(RunManifest m, const Overrides& overrides);

// Runs a resolved manifest. Writes the manifest and all artifacts under
// m.out; progress goes to `log`. Throws ArtifactError, PhaseError or
// ManifestError.
void execute(const RunManifest& m, std::ostream& log);

// Loads, resolves and executes; maps failures to exit codes with a one-line
// message on `err`.
int run_command(std::string_view command, const std::filesystem::path& manifest, const Overrides& overrides,
                std::ostream& log, std::ostream& err);

}  // namespace rclab::cli
