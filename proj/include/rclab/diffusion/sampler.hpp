#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rclab/diffusion/schedule.hpp"
#include "rclab/models/denoiser.hpp"

namespace rclab::diffusion {

using models::Condition;
using models::DenoiserModel;
using num::Tensor;

enum class SamplerKind { Ddpm, Ddim };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Ddim;
  std::size_t steps = 25;
  double guidance = 7.5;
  double eta = 0.0;
  // Clamp the per-step x0 estimate to [-clip, clip] (images); none for Toy2D.
  std::optional<double> clip;

  void validate(const NoiseSchedule& sched) const;
  friend bool operator==(const SamplerConfig&, const SamplerConfig&) = default;
};

void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

// Digest of the canonical JSON form; recorded with cached generations.
std::string sampler_digest(const SamplerConfig& c);

// Ascending inference grid: round(i*(T-1)/(steps-1)), so it always contains
// 0 and T-1 (just T-1 for a single step).
std::vector<std::size_t> step_grid(const NoiseSchedule& sched, std::size_t steps);

// eps(x,t,null) + w * (eps(x,t,c) - eps(x,t,null)). w = 1 and w = 0 return the
// conditional and unconditional predictions directly.
Tensor cfg_predict(const DenoiserModel& model, const Tensor& x_t, std::span<const std::size_t> timesteps,
                   std::span<const Condition> conds, double w);

// Partial-trajectory start: x (batch, or one row per trajectory) already at
// grid timestep t.
struct SampleStart {
  Tensor x;
  std::size_t t = 0;
};

// One reverse trajectory per (condition, seed), guided at every step. The
// trajectory's noise comes only from its own seed, so results do not depend
// on batch composition or worker count.
Tensor sample(const DenoiserModel& model, std::span<const Condition> conds, std::span<const std::uint64_t> seeds,
              const SamplerConfig& cfg, const NoiseSchedule& sched, const std::optional<SampleStart>& start = {});

// Single-trajectory convenience; returns shape [1, input_shape...].
Tensor sample_one(const DenoiserModel& model, const Condition& c, const SamplerConfig& cfg, const NoiseSchedule& sched,
                  std::uint64_t seed, const std::optional<SampleStart>& start = {});

}  // namespace rclab::diffusion
