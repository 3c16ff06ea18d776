#include "rclab/data/toy2d.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rclab/num/rng.hpp"

namespace rclab::data {

void Toy2DSpec::validate() const {
  if (means.empty()) throw ArgumentError("toy2d spec has no conditions");
  if (covariances.size() != means.size()) throw ArgumentError("toy2d spec needs one covariance per mean");
  for (std::size_t c = 0; c < means.size(); ++c) {
    const auto& s = covariances[c];
    const bool symmetric = std::abs(s[1] - s[2]) <= 1e-12 * (std::abs(s[1]) + 1.0);
    if (!symmetric || !(s[0] > 0.0) || !(s[0] * s[3] - s[1] * s[2] > 0.0)) {
      throw ArgumentError("toy2d covariance " + std::to_string(c) + " is not symmetric positive definite");
    }
    for (std::size_t o = 0; o < c; ++o) {
      if (means[o] == means[c]) throw ArgumentError("toy2d means must be pairwise distinct");
    }
  }
}

Toy2DSpec circle_toy2d(std::size_t k, double radius, double variance) {
  Toy2DSpec s;
  for (std::size_t c = 0; c < k; ++c) {
    const double a = 2.0 * std::numbers::pi * double(c) / double(k);
    s.means.push_back({radius * std::cos(a), radius * std::sin(a)});
    s.covariances.push_back({variance, 0.0, 0.0, variance});
  }
  return s;
}

PairedDataset gen_toy2d(const Toy2DSpec& spec, std::size_t per_condition_count, std::uint64_t seed) {
  spec.validate();
  PairedDataset d;
  d.item_shape = {2};
  d.provenance = Provenance::Real;
  for (std::size_t c = 0; c < spec.condition_count(); ++c) {
    const auto& s = spec.covariances[c];
    // Cholesky factor of the 2x2 covariance.
    const double l00 = std::sqrt(s[0]);
    const double l10 = s[2] / l00;
    const double l11 = std::sqrt(s[3] - l10 * l10);
    num::Rng rng(seed, "toy2d", {c});
    for (std::size_t i = 0; i < per_condition_count; ++i) {
      const double z0 = rng.normal(), z1 = rng.normal();
      const float p[2] = {static_cast<float>(spec.means[c][0] + l00 * z0),
                          static_cast<float>(spec.means[c][1] + l10 * z0 + l11 * z1)};
      d.push_back(p, Condition::labeled(static_cast<std::uint32_t>(c)));
    }
  }
  return d;
}

}  // namespace rclab::data
