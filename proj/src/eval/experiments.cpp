#include "rclab/eval/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rclab/errors.hpp"
#include "rclab/num/rng.hpp"

namespace rclab::eval {

namespace {

std::vector<double> to_double(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

GaussianStats marginal(const data::Toy2DSpec& spec, std::size_t c, double ab) {
  GaussianStats s;
  s.mean = Eigen::Vector2d(spec.means[c][0], spec.means[c][1]) * std::sqrt(ab);
  const auto& m = spec.covariances[c];
  Eigen::Matrix2d cov;
  cov << m[0], m[1], m[2], m[3];
  s.cov = ab * cov + (1.0 - ab) * Eigen::Matrix2d::Identity();
  return s;
}

}  // namespace

double feature_frechet(const Tensor& samples_a, const Tensor& samples_b, const FidelityClassifier& classifier) {
  const std::size_t need = 2 * classifier.feature_width;
  if (samples_a.dim(0) < need || samples_b.dim(0) < need) {
    throw ArgumentError("feature_frechet needs at least " + std::to_string(need) + " samples per side, got " +
                        std::to_string(samples_a.dim(0)) + " and " + std::to_string(samples_b.dim(0)));
  }
  const auto fa = to_double(classifier_features(classifier, samples_a));
  const auto fb = to_double(classifier_features(classifier, samples_b));
  return frechet(fit_gaussian(fa, classifier.feature_width), fit_gaussian(fb, classifier.feature_width));
}

std::vector<ConditionFidelity> condition_fidelity(const diffusion::DenoiserModel& model,
                                                  std::span<const Condition> conditions, std::size_t n,
                                                  const FidelityClassifier& classifier,
                                                  const diffusion::SamplerConfig& sampler,
                                                  const diffusion::NoiseSchedule& sched, std::uint64_t seed,
                                                  Tensor* images) {
  std::vector<ConditionFidelity> rows;
  if (n == 0) return rows;
  for (const auto& c : conditions) {
    if (c.is_null()) throw ArgumentError("condition_fidelity: the null condition has no class");
    if (c.class_id >= classifier.class_count) {
      throw ArgumentError("condition_fidelity: class " + std::to_string(c.class_id) + " is outside the classifier");
    }
    rows.push_back({c, n, 0});
  }
  if (conditions.empty()) return rows;
  std::vector<Condition> conds;
  std::vector<std::uint64_t> seeds;
  conds.reserve(conditions.size() * n);
  for (std::size_t k = 0; k < conditions.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      conds.push_back(conditions[k]);
      seeds.push_back(num::derive_seed(seed, "fidelity", {k, i}));
    }
  }
  Tensor x = diffusion::sample(model, conds, seeds, sampler, sched);
  const auto pred = classify(classifier, x);
  for (std::size_t k = 0; k < conditions.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) rows[k].matches += pred[k * n + i] == conditions[k].class_id;
  }
  if (images) *images = std::move(x);
  return rows;
}

std::vector<SwapCell> swap_experiment(const diffusion::DenoiserModel& model, std::span<const std::size_t> t_grid,
                                      std::span<const SwapPair> pairs, const FidelityClassifier& classifier,
                                      const diffusion::SamplerConfig& sampler, const diffusion::NoiseSchedule& sched,
                                      std::uint64_t seed) {
  const auto grid = diffusion::step_grid(sched, sampler.steps);
  for (std::size_t t : t_grid) {
    if (std::find(grid.begin(), grid.end(), t) == grid.end()) {
      throw ArgumentError("swap_experiment: t = " + std::to_string(t) + " is not on the sampler grid");
    }
  }
  const std::size_t row = model.spec.input_size();
  for (const auto& p : pairs) {
    if (p.original.class_only() == p.target.class_only()) {
      throw ArgumentError("swap_experiment: original and target conditions must differ");
    }
    if (p.image.size() != row) throw ArgumentError("swap_experiment: source image does not fit the model");
  }
  std::vector<SwapCell> cells;
  if (pairs.empty()) {
    for (std::size_t t : t_grid) cells.push_back({t, 0, 0.0, 0.0, 0.0});
    return cells;
  }
  num::Shape shape{pairs.size()};
  shape.insert(shape.end(), model.spec.input_shape.begin(), model.spec.input_shape.end());
  Tensor x0(shape);
  std::vector<Condition> targets;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    std::copy(pairs[p].image.begin(), pairs[p].image.end(), x0.ptr() + p * row);
    targets.push_back(pairs[p].target);
  }
  for (std::size_t ti = 0; ti < t_grid.size(); ++ti) {
    const std::size_t t = t_grid[ti];
    Tensor eps(shape);
    std::vector<std::uint64_t> seeds(pairs.size());
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      num::Rng rng(seed, "swap-noise", {ti, p});
      for (std::size_t k = 0; k < row; ++k) eps[p * row + k] = static_cast<float>(rng.normal());
      seeds[p] = num::derive_seed(seed, "swap-trajectory", {ti, p});
    }
    const Tensor xt = diffusion::forward_diffuse(x0, t, eps, sched);
    const Tensor out = diffusion::sample(model, targets, seeds, sampler, sched, diffusion::SampleStart{xt, t});
    const auto pred = classify(classifier, out);
    SwapCell cell{t, pairs.size(), 0.0, 0.0, 0.0};
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (pred[p] == pairs[p].original.class_id) {
        cell.follows_original += 1.0;
      } else if (pred[p] == pairs[p].target.class_id) {
        cell.follows_condition += 1.0;
      } else {
        cell.other += 1.0;
      }
    }
    const double n = double(pairs.size());
    cell.follows_original /= n;
    cell.follows_condition /= n;
    cell.other /= n;
    cells.push_back(cell);
  }
  return cells;
}

std::vector<double> smooth(std::span<const double> values, std::size_t window) {
  if (window == 0) throw ArgumentError("smoothing window must be positive");
  const std::size_t half = window / 2;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(values.size() - 1, i + half);
    double s = 0;
    for (std::size_t k = lo; k <= hi; ++k) s += values[k];
    out[i] = s / double(hi - lo + 1);
  }
  return out;
}

std::vector<OverlapRow> overlap_curve(const data::Toy2DSpec& spec, std::size_t c1, std::size_t c2,
                                      const diffusion::NoiseSchedule& sched, std::span<const std::size_t> ts) {
  spec.validate();
  if (c1 >= spec.condition_count() || c2 >= spec.condition_count()) {
    throw ArgumentError("overlap_curve: condition index out of range");
  }
  std::vector<std::size_t> all;
  if (ts.empty()) {
    all.resize(sched.steps);
    for (std::size_t t = 0; t < sched.steps; ++t) all[t] = t;
    ts = all;
  }
  std::vector<OverlapRow> rows;
  rows.reserve(ts.size());
  for (std::size_t t : ts) {
    if (t >= sched.steps) throw ArgumentError("overlap_curve: timestep out of range");
    const double ab = sched.alpha_bar[t];
    const auto a = marginal(spec, c1, ab);
    const auto b = marginal(spec, c2, ab);
    rows.push_back({t, ab, symmetric_kl(a, b), frechet(a, b)});
  }
  return rows;
}

FidelitySplit split_fidelity(std::span<const ConditionFidelity> rows, const std::set<Condition>& seen) {
  FidelitySplit s;
  double seen_sum = 0, unseen_sum = 0;
  for (const auto& r : rows) {
    if (seen.contains(r.condition)) {
      seen_sum += r.fidelity();
      ++s.seen_conditions;
    } else {
      unseen_sum += r.fidelity();
      ++s.unseen_conditions;
    }
  }
  if (s.seen_conditions) s.seen = seen_sum / double(s.seen_conditions);
  if (s.unseen_conditions) s.unseen = unseen_sum / double(s.unseen_conditions);
  if (!rows.empty()) s.overall = (seen_sum + unseen_sum) / double(rows.size());
  return s;
}

nlohmann::json report_json(const EvalReport& r, bool include_timing) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& f : r.fidelity) {
    rows.push_back({{"condition", f.condition.to_string()},
                    {"class", f.condition.is_null() ? -1 : static_cast<int>(f.condition.class_id)},
                    {"style", f.condition.kind == Condition::Kind::Composite ? static_cast<int>(f.condition.style_id)
                                                                             : -1},
                    {"samples", f.samples},
                    {"matches", f.matches},
                    {"fidelity", f.fidelity()},
                    {"seen", r.seen.contains(f.condition)}});
  }
  nlohmann::json j{{"name", r.name},
                   {"fidelity", std::move(rows)},
                   {"split",
                    {{"seen", r.split.seen},
                     {"unseen", r.split.unseen},
                     {"overall", r.split.overall},
                     {"seen_conditions", r.split.seen_conditions},
                     {"unseen_conditions", r.split.unseen_conditions}}},
                   {"frechet", r.frechet},
                   {"digests", r.digests}};
  if (include_timing) j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  r.name = j.at("name").get<std::string>();
  for (const auto& row : j.at("fidelity")) {
    const int cls = row.at("class").get<int>();
    const int style = row.at("style").get<int>();
    Condition c = cls < 0    ? Condition::null()
                  : style < 0 ? Condition::labeled(static_cast<std::uint32_t>(cls))
                              : Condition::composite(static_cast<std::uint32_t>(cls), static_cast<std::uint32_t>(style));
    r.fidelity.push_back({c, row.at("samples").get<std::size_t>(), row.at("matches").get<std::size_t>()});
    if (row.at("seen").get<bool>()) r.seen.insert(c);
  }
  r.split = split_fidelity(r.fidelity, r.seen);
  r.frechet = j.value("frechet", std::map<std::string, double>{});
  r.digests = j.value("digests", std::map<std::string, std::string>{});
  r.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
  return r;
}

std::string report_csv(const EvalReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "report,metric,condition,value\n";
  for (const auto& f : r.fidelity) {
    os << r.name << ",fidelity," << f.condition.to_string() << ',' << f.fidelity() << '\n';
  }
  os << r.name << ",fidelity_seen,all," << r.split.seen << '\n';
  os << r.name << ",fidelity_unseen,all," << r.split.unseen << '\n';
  os << r.name << ",fidelity_overall,all," << r.split.overall << '\n';
  for (const auto& [k, v] : r.frechet) os << r.name << ",frechet_" << k << ",all," << v << '\n';
  return os.str();
}

}  // namespace rclab::eval
