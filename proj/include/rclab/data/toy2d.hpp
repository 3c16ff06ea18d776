#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "rclab/data/dataset.hpp"

namespace rclab::data {

// K Gaussian conditions in the plane.
struct Toy2DSpec {
  std::vector<std::array<double, 2>> means;
  // Row-major 2x2 covariances.
  std::vector<std::array<double, 4>> covariances;

  std::size_t condition_count() const noexcept { return means.size(); }
  void validate() const;
};

// K conditions with means evenly spaced on a circle and isotropic covariance.
Toy2DSpec circle_toy2d(std::size_t k = 8, double radius = 4.0, double variance = 0.05);

// per_condition_count draws from N(mu_c, Sigma_c) for each condition, labeled
// Labeled(c); deterministic per seed.
PairedDataset gen_toy2d(const Toy2DSpec& spec, std::size_t per_condition_count, std::uint64_t seed);

}  // namespace rclab::data
