#include "rclab/diffusion/schedule.hpp"

#include <cmath>
#include <string>

namespace rclab::diffusion {

NoiseSchedule build_schedule(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 2) throw ArgumentError("noise schedule needs at least 2 steps, got " + std::to_string(steps));
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ArgumentError("noise schedule needs 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha_bar.resize(steps);
  double prod = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    s.beta[t] = beta_start + (beta_end - beta_start) * double(t) / double(steps - 1);
    prod *= 1.0 - s.beta[t];
    s.alpha_bar[t] = prod;
  }
  return s;
}

template <class Real>
num::BasicTensor<Real> forward_diffuse(const num::BasicTensor<Real>& x0, std::size_t t,
                                       const num::BasicTensor<Real>& eps, const NoiseSchedule& sched) {
  if (x0.shape() != eps.shape()) {
    throw ArgumentError("forward_diffuse: x0 " + num::shape_string(x0.shape()) + " vs noise " +
                        num::shape_string(eps.shape()));
  }
  if (t >= sched.steps) throw ArgumentError("forward_diffuse: timestep " + std::to_string(t) + " out of range");
  const Real a = static_cast<Real>(std::sqrt(sched.alpha_bar[t]));
  const Real s = static_cast<Real>(std::sqrt(1.0 - sched.alpha_bar[t]));
  num::BasicTensor<Real> out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + s * eps[i];
  return out;
}

template <class Real>
num::BasicTensor<Real> forward_diffuse_rows(const num::BasicTensor<Real>& x0, std::span<const std::size_t> timesteps,
                                            const num::BasicTensor<Real>& eps, const NoiseSchedule& sched) {
  if (x0.shape() != eps.shape() || x0.dim(0) != timesteps.size()) {
    throw ArgumentError("forward_diffuse_rows: shape mismatch");
  }
  const std::size_t row = x0.size() / x0.dim(0);
  num::BasicTensor<Real> out(x0.shape());
  for (std::size_t b = 0; b < timesteps.size(); ++b) {
    const std::size_t t = timesteps[b];
    if (t >= sched.steps) throw ArgumentError("forward_diffuse: timestep " + std::to_string(t) + " out of range");
    const Real a = static_cast<Real>(std::sqrt(sched.alpha_bar[t]));
    const Real s = static_cast<Real>(std::sqrt(1.0 - sched.alpha_bar[t]));
    for (std::size_t i = b * row; i < (b + 1) * row; ++i) out[i] = a * x0[i] + s * eps[i];
  }
  return out;
}

template num::Tensor forward_diffuse<float>(const num::Tensor&, std::size_t, const num::Tensor&, const NoiseSchedule&);
template num::Tensor64 forward_diffuse<double>(const num::Tensor64&, std::size_t, const num::Tensor64&,
                                               const NoiseSchedule&);
template num::Tensor forward_diffuse_rows<float>(const num::Tensor&, std::span<const std::size_t>, const num::Tensor&,
                                                 const NoiseSchedule&);
template num::Tensor64 forward_diffuse_rows<double>(const num::Tensor64&, std::span<const std::size_t>,
                                                    const num::Tensor64&, const NoiseSchedule&);

}  // namespace rclab::diffusion
