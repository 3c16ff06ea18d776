#pragma once

#include <string>

#include "json.hpp"
#include "rclab/data/dataset.hpp"
#include "rclab/num/rng.hpp"

namespace rclab::distill {

using models::Condition;

enum class PolicyKind { Off, Exponential, MirroredExponential, Linear, Sigmoid, Constant };

// Timestep-dependent probability p(t) of swapping the paired condition for a
// uniform draw from the condition pool.
//
//   Exponential          exp(-lambda (1 - t/T))
//   MirroredExponential  exp(-lambda (1 - t/T)) for t > T/2, exp(-lambda t/T) otherwise
//   Linear               t/T
//   Sigmoid              1 / (1 + exp(-slope (t/T - center)))
//   Constant             p
//   Off                  0
struct RandomConditioningPolicy {
  PolicyKind kind = PolicyKind::Off;
  double lambda = 5.0;
  double slope = 20.0;
  double center = 0.7;
  double p = 0.5;

  static RandomConditioningPolicy off() { return {}; }
  static RandomConditioningPolicy exponential(double lambda = 5.0) {
    return {.kind = PolicyKind::Exponential, .lambda = lambda};
  }
  static RandomConditioningPolicy mirrored(double lambda = 5.0) {
    return {.kind = PolicyKind::MirroredExponential, .lambda = lambda};
  }
  static RandomConditioningPolicy linear() { return {.kind = PolicyKind::Linear}; }
  static RandomConditioningPolicy sigmoid(double slope = 20.0, double center = 0.7) {
    return {.kind = PolicyKind::Sigmoid, .slope = slope, .center = center};
  }
  static RandomConditioningPolicy constant(double p) { return {.kind = PolicyKind::Constant, .p = p}; }

  void validate() const;
  // Short label such as "exponential(5)" or "constant(0.5)".
  std::string label() const;

  friend bool operator==(const RandomConditioningPolicy&, const RandomConditioningPolicy&) = default;
};

void to_json(nlohmann::json& j, const RandomConditioningPolicy& p);
void from_json(const nlohmann::json& j, RandomConditioningPolicy& p);

// Defined on t in [0, T] so the endpoint t = T is available for inspection.
double p_of_t(const RandomConditioningPolicy& policy, double t, double T);

// Returns a uniform pool draw with probability p(t), otherwise `paired`.
// Always consumes exactly one uniform from `rng`, plus one index draw on a swap.
Condition sample_condition(const RandomConditioningPolicy& policy, std::size_t t, std::size_t T,
                           const Condition& paired, const data::ConditionPool& pool, num::Rng& rng);

}  // namespace rclab::distill
