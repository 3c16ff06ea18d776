#pragma once

// Central finite-difference oracle for gradient checks. Test-only: evaluates
// the loss through a forward-only closure and never touches the tape's
// backward machinery.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "rclab/num/param_set.hpp"

namespace rclab::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-9) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / scale;
}

// Probes `probes` random (entry, element) coordinates of every ParamSet in
// `sets`, comparing analytic grads against (f(p+h) - f(p-h)) / 2h.
inline GradCheckResult finite_difference_check(
    std::vector<num::ParamSet64*> sets, const std::vector<const num::ParamSet64*>& analytic,
    const std::function<double()>& loss, std::size_t probes, std::uint64_t seed, double step = 1e-5) {
  GradCheckResult r;
  std::mt19937_64 gen(seed);
  std::vector<std::pair<std::size_t, std::size_t>> entries;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (std::size_t e = 0; e < sets[s]->size(); ++e) {
      if (sets[s]->entry(e).trainable) entries.emplace_back(s, e);
    }
  }
  for (std::size_t p = 0; p < probes; ++p) {
    const auto [s, e] = entries[gen() % entries.size()];
    auto values = sets[s]->values(e);
    const std::size_t i = gen() % values.size();
    const double orig = values[i];
    values[i] = orig + step;
    const double up = loss();
    values[i] = orig - step;
    const double down = loss();
    values[i] = orig;
    const double numeric = (up - down) / (2 * step);
    const double exact = analytic[s]->entry(e).value[i];
    r.max_rel_error = std::max(r.max_rel_error, relative_error(exact, numeric));
    ++r.probes;
  }
  return r;
}

}  // namespace rclab::testing
