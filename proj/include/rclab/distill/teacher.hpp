#pragma once

#include <cstdint>
#include <functional>

#include "json.hpp"
#include "rclab/data/dataset.hpp"
#include "rclab/diffusion/schedule.hpp"
#include "rclab/errors.hpp"
#include "rclab/models/denoiser.hpp"
#include "rclab/num/adamw.hpp"

namespace rclab::num {

void to_json(nlohmann::json& j, const AdamWConfig& c);
void from_json(const nlohmann::json& j, AdamWConfig& c);

}  // namespace rclab::num

namespace rclab::distill {

using models::DenoiserModel;
using models::DenoiserSpec;

struct TeacherConfig {
  std::size_t iterations = 30000;
  std::size_t batch = 128;
  num::AdamWConfig optimizer{};
  double null_prob = 0.1;
  // Exponential moving average of the weights; 0 returns the raw weights.
  double ema_decay = 0.0;
  // Cosine decay of the learning rate to zero over `iterations`.
  bool cosine_decay = false;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TeacherConfig&, const TeacherConfig&) = default;
};

void to_json(nlohmann::json& j, const TeacherConfig& c);
void from_json(const nlohmann::json& j, TeacherConfig& c);

// Raised when training produces a non-finite value. Carries the parameters
// from the last completed iteration.
class TrainingDivergedError : public NumericError {
 public:
  TrainingDivergedError(const NumericError& cause, std::size_t iteration, DenoiserModel last_finite)
      : NumericError(std::string("training diverged at iteration ") + std::to_string(iteration) + ": " +
                         cause.what(),
                     cause.node(), static_cast<long>(iteration)),
        last_finite_(std::move(last_finite)) {}

  const DenoiserModel& last_finite() const noexcept { return last_finite_; }

 private:
  DenoiserModel last_finite_;
};

// Called every `every` iterations with (iteration, loss).
struct Progress {
  std::size_t every = 0;
  std::function<void(std::size_t, double)> fn;
};

// Trains an epsilon-prediction denoiser on `dataset`. Each example of
// iteration i draws its row, timestep, noise and null dropout from
// Rng(seed, "teacher-example", {i, b}). Parameters start from
// build_model(spec, derive_seed(seed, "teacher-init")).
DenoiserModel train_teacher(const data::PairedDataset& dataset, const DenoiserSpec& spec, const TeacherConfig& config,
                            const diffusion::NoiseSchedule& sched, const Progress& progress = {});

}  // namespace rclab::distill
