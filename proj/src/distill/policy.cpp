#include "rclab/distill/policy.hpp"

#include <cmath>
#include <sstream>

#include "rclab/errors.hpp"

namespace rclab::distill {

namespace {

const char* kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Off:
      return "off";
    case PolicyKind::Exponential:
      return "exponential";
    case PolicyKind::MirroredExponential:
      return "mirrored";
    case PolicyKind::Linear:
      return "linear";
    case PolicyKind::Sigmoid:
      return "sigmoid";
    case PolicyKind::Constant:
      return "constant";
  }
  return "off";
}

}  // namespace

void RandomConditioningPolicy::validate() const {
  switch (kind) {
    case PolicyKind::Exponential:
    case PolicyKind::MirroredExponential:
      if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ArgumentError("policy lambda must be positive");
      break;
    case PolicyKind::Sigmoid:
      if (!(slope > 0.0) || !std::isfinite(slope)) throw ArgumentError("policy slope must be positive");
      if (!(center > 0.0 && center < 1.0)) throw ArgumentError("policy center must lie in (0, 1)");
      break;
    case PolicyKind::Constant:
      if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("constant policy probability must lie in [0, 1]");
      break;
    case PolicyKind::Off:
    case PolicyKind::Linear:
      break;
  }
}

std::string RandomConditioningPolicy::label() const {
  std::ostringstream os;
  os << kind_name(kind);
  switch (kind) {
    case PolicyKind::Exponential:
    case PolicyKind::MirroredExponential:
      os << '(' << lambda << ')';
      break;
    case PolicyKind::Sigmoid:
      os << '(' << slope << ", " << center << ')';
      break;
    case PolicyKind::Constant:
      os << '(' << p << ')';
      break;
    default:
      break;
  }
  return os.str();
}

void to_json(nlohmann::json& j, const RandomConditioningPolicy& p) {
  j = nlohmann::json{{"kind", kind_name(p.kind)}};
  switch (p.kind) {
    case PolicyKind::Exponential:
    case PolicyKind::MirroredExponential:
      j["lambda"] = p.lambda;
      break;
    case PolicyKind::Sigmoid:
      j["slope"] = p.slope;
      j["center"] = p.center;
      break;
    case PolicyKind::Constant:
      j["p"] = p.p;
      break;
    default:
      break;
  }
}

void from_json(const nlohmann::json& j, RandomConditioningPolicy& p) {
  const std::string kind = j.at("kind").get<std::string>();
  p = RandomConditioningPolicy{};
  if (kind == "off") {
    p.kind = PolicyKind::Off;
  } else if (kind == "exponential") {
    p.kind = PolicyKind::Exponential;
  } else if (kind == "mirrored") {
    p.kind = PolicyKind::MirroredExponential;
  } else if (kind == "linear") {
    p.kind = PolicyKind::Linear;
  } else if (kind == "sigmoid") {
    p.kind = PolicyKind::Sigmoid;
  } else if (kind == "constant") {
    p.kind = PolicyKind::Constant;
  } else {
    throw ArgumentError("unknown policy kind '" + kind + "'");
  }
  p.lambda = j.value("lambda", p.lambda);
  p.slope = j.value("slope", p.slope);
  p.center = j.value("center", p.center);
  p.p = j.value("p", p.p);
  p.validate();
}

double p_of_t(const RandomConditioningPolicy& policy, double t, double T) {
  if (!(T > 0.0) || !(t >= 0.0 && t <= T)) {
    throw ArgumentError("p_of_t: t must lie in [0, T]");
  }
  const double r = t / T;
  switch (policy.kind) {
    case PolicyKind::Off:
      return 0.0;
    case PolicyKind::Exponential:
      return std::exp(-policy.lambda * (1.0 - r));
    case PolicyKind::MirroredExponential:
      return t > T / 2.0 ? std::exp(-policy.lambda * (1.0 - r)) : std::exp(-policy.lambda * r);
    case PolicyKind::Linear:
      return r;
    case PolicyKind::Sigmoid:
      return 1.0 / (1.0 + std::exp(-policy.slope * (r - policy.center)));
    case PolicyKind::Constant:
      return policy.p;
  }
  return 0.0;
}

Condition sample_condition(const RandomConditioningPolicy& policy, std::size_t t, std::size_t T,
                           const Condition& paired, const data::ConditionPool& pool, num::Rng& rng) {
  if (pool.conditions.empty()) throw ArgumentError("sample_condition: condition pool is empty");
  const double u = rng.uniform();
  if (u < p_of_t(policy, double(t), double(T))) return pool.conditions[rng.below(pool.size())];
  return paired;
}

}  // namespace rclab::distill
