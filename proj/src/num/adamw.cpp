#include "rclab/num/adamw.hpp"

#include <cmath>
#include <numbers>

namespace rclab::num {

double cosine_lr(double base, std::size_t iteration, std::size_t total) {
  if (total == 0) return base;
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * double(iteration) / double(total)));
}

template <class Real>
void BasicAdamW<Real>::step(BasicParamSet<Real>& params, const BasicParamSet<Real>& grads) {
  if (params.size() != first_.size() || grads.size() != params.size()) {
    throw ShapeError("adamw: parameter/gradient/state entry counts differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& g = grads.entry(i);
    if (g.value.shape() != params.entry(i).value.shape()) {
      throw ShapeError("adamw: gradient for '" + g.name + "' has shape " + shape_string(g.value.shape()));
    }
    if (!g.value.all_finite()) throw NumericError("adamw: non-finite gradient for '" + g.name + "'", g.name);
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const Real decay = static_cast<Real>(1.0 - config_.lr * config_.weight_decay);
  const Real b1 = static_cast<Real>(config_.beta1);
  const Real b2 = static_cast<Real>(config_.beta2);
  const Real c1 = static_cast<Real>(1.0 / (1.0 - std::pow(config_.beta1, t)));
  const Real c2 = static_cast<Real>(1.0 / (1.0 - std::pow(config_.beta2, t)));
  const Real lr = static_cast<Real>(config_.lr);
  const Real eps = static_cast<Real>(config_.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params.entry(i).trainable) continue;
    auto p = params.values(i);
    auto m = first_.values(i);
    auto v = second_.values(i);
    const auto g = grads.entry(i).value.data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= decay;
      m[j] = b1 * m[j] + (Real{1} - b1) * g[j];
      v[j] = b2 * v[j] + (Real{1} - b2) * g[j] * g[j];
      p[j] -= lr * (m[j] * c1) / (std::sqrt(v[j] * c2) + eps);
    }
  }
}

template <class Real>
void BasicAdamW<Real>::restore(std::uint64_t steps, const BasicParamSet<Real>& first,
                               const BasicParamSet<Real>& second) {
  for (std::size_t i = 0; i < first_.size(); ++i) {
    first_.assign(first_.entry(i).name, first.get(first_.entry(i).name));
    second_.assign(second_.entry(i).name, second.get(second_.entry(i).name));
  }
  steps_ = steps;
}

template class BasicAdamW<float>;
template class BasicAdamW<double>;

}  // namespace rclab::num
