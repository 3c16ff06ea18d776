#pragma once

#include <cstddef>
#include <vector>

#include "rclab/num/tensor.hpp"

namespace rclab::diffusion {

// Discrete forward process over `steps` training timesteps.
struct NoiseSchedule {
  std::size_t steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;
};

// Linear beta schedule with alpha_bar as the running product of (1 - beta).
NoiseSchedule build_schedule(std::size_t steps, double beta_start = 1e-4, double beta_end = 0.02);

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
template <class Real>
num::BasicTensor<Real> forward_diffuse(const num::BasicTensor<Real>& x0, std::size_t t,
                                       const num::BasicTensor<Real>& eps, const NoiseSchedule& sched);

// Row-wise variant: row b of x0/eps (leading dimension) is noised at timesteps[b].
template <class Real>
num::BasicTensor<Real> forward_diffuse_rows(const num::BasicTensor<Real>& x0, std::span<const std::size_t> timesteps,
                                            const num::BasicTensor<Real>& eps, const NoiseSchedule& sched);

}  // namespace rclab::diffusion
