#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "rclab/data/toy2d.hpp"
#include "rclab/diffusion/sampler.hpp"
#include "rclab/eval/classifier.hpp"
#include "rclab/eval/frechet.hpp"

namespace rclab::eval {

using models::Condition;

// Fits Gaussians to the classifier's penultimate features of each side.
// Each side needs at least 2 * feature_width samples.
double feature_frechet(const Tensor& samples_a, const Tensor& samples_b, const FidelityClassifier& classifier);

struct ConditionFidelity {
  Condition condition;
  std::size_t samples = 0;
  std::size_t matches = 0;

  double fidelity() const noexcept { return samples == 0 ? 0.0 : double(matches) / double(samples); }
};

// Generates n samples per condition (trajectory seeds
// derive_seed(seed, "fidelity", {condition index, i})) and counts the ones
// the classifier assigns to the condition's class; n = 0 gives no rows. `images`, when given,
// receives the generated samples in condition-major order.
std::vector<ConditionFidelity> condition_fidelity(const diffusion::DenoiserModel& model,
                                                  std::span<const Condition> conditions, std::size_t n,
                                                  const FidelityClassifier& classifier,
                                                  const diffusion::SamplerConfig& sampler,
                                                  const diffusion::NoiseSchedule& sched, std::uint64_t seed,
                                                  Tensor* images = nullptr);

// Source image labelled c_a, regenerated under c_b != c_a.
struct SwapPair {
  std::vector<float> image;
  Condition original;
  Condition target;
};

struct SwapCell {
  std::size_t t = 0;
  std::size_t pairs = 0;
  double follows_original = 0.0;
  double follows_condition = 0.0;
  double other = 0.0;
};

// For every grid timestep: noise each source to x_t, denoise from t under the
// target condition, classify. Timesteps must lie on the sampler's grid.
std::vector<SwapCell> swap_experiment(const diffusion::DenoiserModel& model, std::span<const std::size_t> t_grid,
                                      std::span<const SwapPair> pairs, const FidelityClassifier& classifier,
                                      const diffusion::SamplerConfig& sampler, const diffusion::NoiseSchedule& sched,
                                      std::uint64_t seed);

// Centered moving average with window `window` (shrunk at the ends).
std::vector<double> smooth(std::span<const double> values, std::size_t window);

struct OverlapRow {
  std::size_t t = 0;
  double alpha_bar = 0.0;
  double symmetric_kl = 0.0;
  double w2 = 0.0;
};

// Closed-form noised marginals N(sqrt(ab) mu_c, ab Sigma_c + (1 - ab) I) of
// two Toy2D conditions at every t in `ts` (all t when empty).
std::vector<OverlapRow> overlap_curve(const data::Toy2DSpec& spec, std::size_t c1, std::size_t c2,
                                      const diffusion::NoiseSchedule& sched, std::span<const std::size_t> ts = {});

struct FidelitySplit {
  double seen = 0.0;
  double unseen = 0.0;
  double overall = 0.0;
  std::size_t seen_conditions = 0;
  std::size_t unseen_conditions = 0;
};

// Means of per-condition fidelity over the seen set, its complement, and
// everything. Conditions are split by membership in `seen`.
FidelitySplit split_fidelity(std::span<const ConditionFidelity> rows, const std::set<Condition>& seen);

struct EvalReport {
  std::string name;
  std::vector<ConditionFidelity> fidelity;
  std::set<Condition> seen;
  FidelitySplit split;
  std::map<std::string, double> frechet;
  std::map<std::string, std::string> digests;
  double wall_clock_seconds = 0.0;
};

// Wall-clock time is left out unless requested so reruns stay byte-identical.
nlohmann::json report_json(const EvalReport& r, bool include_timing = false);
EvalReport report_from_json(const nlohmann::json& j);
// One row per metric cell: report,metric,condition,value
std::string report_csv(const EvalReport& r);

}  // namespace rclab::eval
