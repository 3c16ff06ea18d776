#pragma once

#include <cstdint>

#include "rclab/num/param_set.hpp"

namespace rclab::num {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

// Decoupled-weight-decay Adam. Moments mirror the parameter set they were
// created for; only trainable entries are updated.
template <class Real>
class BasicAdamW {
 public:
  BasicAdamW() = default;
  BasicAdamW(const BasicParamSet<Real>& params, AdamWConfig config)
      : config_(config), first_(params.zeros_like()), second_(params.zeros_like()) {}

  void step(BasicParamSet<Real>& params, const BasicParamSet<Real>& grads);

  const AdamWConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }
  std::uint64_t step_count() const noexcept { return steps_; }
  const BasicParamSet<Real>& first_moment() const noexcept { return first_; }
  const BasicParamSet<Real>& second_moment() const noexcept { return second_; }

  // Restores serialized state; shapes must match the current moments.
  void restore(std::uint64_t steps, const BasicParamSet<Real>& first, const BasicParamSet<Real>& second);

 private:
  AdamWConfig config_;
  std::uint64_t steps_ = 0;
  BasicParamSet<Real> first_;
  BasicParamSet<Real> second_;
};

// base * (1 + cos(pi * iteration / total)) / 2
double cosine_lr(double base, std::size_t iteration, std::size_t total);

using AdamW = BasicAdamW<float>;
using AdamW64 = BasicAdamW<double>;

}  // namespace rclab::num
