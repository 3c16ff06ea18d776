#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rclab/data/dataset.hpp"
#include "rclab/diffusion/schedule.hpp"
#include "rclab/distill/policy.hpp"

namespace rclab::distill {

using num::Tensor;

// One training batch after noising and condition perturbation.
struct NoisedBatch {
  Tensor x_t;
  Tensor eps;
  std::vector<std::size_t> t;
  std::vector<Condition> c;
};

struct BatchRecipe {
  std::size_t batch = 128;
  double null_prob = 0.1;
  RandomConditioningPolicy policy{};
  // Required unless the policy is Off.
  const data::ConditionPool* pool = nullptr;
};

// Example b of `iteration` uses its own stream Rng(seed, purpose,
// {iteration, b}) and draws, in order: source row, timestep t uniform in
// [0, T), noise, the random-conditioning swap, then null dropout.
NoisedBatch draw_batch(const data::PairedDataset& source, const diffusion::NoiseSchedule& sched,
                       const BatchRecipe& recipe, std::uint64_t seed, std::string_view purpose,
                       std::uint64_t iteration);

}  // namespace rclab::distill
