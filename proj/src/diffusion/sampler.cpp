#include "rclab/diffusion/sampler.hpp"

#include <algorithm>
#include <cmath>

#include "rclab/num/parallel.hpp"
#include "rclab/num/rng.hpp"
#include "rclab/util/digest.hpp"

namespace rclab::diffusion {

namespace {

constexpr std::size_t kChunk = 64;

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  num::Shape s = a.shape();
  s[0] += b.dim(0);
  std::vector<float> data(a.vec());
  data.insert(data.end(), b.vec().begin(), b.vec().end());
  return Tensor(std::move(s), std::move(data));
}

// Runs trajectories [begin, end) and writes their final x0 into `out`.
void run_chunk(const DenoiserModel& model, std::span<const Condition> conds, std::span<const std::uint64_t> seeds,
               const SamplerConfig& cfg, const NoiseSchedule& sched, const std::vector<std::size_t>& grid,
               std::size_t first_index, const std::optional<SampleStart>& start, std::size_t begin, std::size_t end,
               Tensor& out) {
  const std::size_t n = end - begin;
  const std::size_t row = model.spec.input_size();
  num::Shape shape{n};
  shape.insert(shape.end(), model.spec.input_shape.begin(), model.spec.input_shape.end());

  std::vector<num::Rng> rngs;
  rngs.reserve(n);
  for (std::size_t i = begin; i < end; ++i) rngs.emplace_back(seeds[i], "trajectory");

  Tensor x(shape);
  if (start) {
    const bool per_row = start->x.dim(0) == conds.size();
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = per_row ? begin + i : 0;
      std::copy_n(start->x.ptr() + src * row, row, x.ptr() + i * row);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < row; ++j) x[i * row + j] = static_cast<float>(rngs[i].normal());
    }
  }
  const std::vector<Condition> c(conds.begin() + begin, conds.begin() + end);

  for (std::size_t gi = first_index + 1; gi-- > 0;) {
    const std::size_t t = grid[gi];
    const double ab = sched.alpha_bar[t];
    const double ab_prev = gi == 0 ? 1.0 : sched.alpha_bar[grid[gi - 1]];
    const std::vector<std::size_t> ts(n, t);
    const Tensor eps = cfg_predict(model, x, ts, c, cfg.guidance);

    const float sa = static_cast<float>(std::sqrt(ab));
    const float s1a = static_cast<float>(std::sqrt(1.0 - ab));
    Tensor x0(shape), e(shape);
    for (std::size_t k = 0; k < x.size(); ++k) {
      float v = (x[k] - s1a * eps[k]) / sa;
      float ek = eps[k];
      if (cfg.clip) {
        const float lim = static_cast<float>(*cfg.clip);
        const float clipped = std::clamp(v, -lim, lim);
        if (clipped != v) ek = (x[k] - sa * clipped) / s1a;
        v = clipped;
      }
      x0[k] = v;
      e[k] = ek;
    }
    if (gi == 0) {
      x = std::move(x0);
      break;
    }

    float c_x0, c_dir, sigma;
    float c_xt = 0.0f;
    if (cfg.kind == SamplerKind::Ddim) {
      const double s = cfg.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
      c_x0 = static_cast<float>(std::sqrt(ab_prev));
      c_dir = static_cast<float>(std::sqrt(std::max(0.0, 1.0 - ab_prev - s * s)));
      sigma = static_cast<float>(s);
    } else {
      // Posterior q(x_prev | x_t, x0) on the strided grid.
      const double a_step = ab / ab_prev;
      const double b_step = 1.0 - a_step;
      c_x0 = static_cast<float>(std::sqrt(ab_prev) * b_step / (1.0 - ab));
      c_xt = static_cast<float>(std::sqrt(a_step) * (1.0 - ab_prev) / (1.0 - ab));
      c_dir = 0.0f;
      sigma = static_cast<float>(std::sqrt(b_step * (1.0 - ab_prev) / (1.0 - ab)));
    }
    Tensor next(shape);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < row; ++j) {
        const std::size_t k = i * row + j;
        float v = c_x0 * x0[k] + c_dir * e[k] + c_xt * x[k];
        if (sigma > 0.0f) v += sigma * static_cast<float>(rngs[i].normal());
        next[k] = v;
      }
    }
    x = std::move(next);
  }
  std::copy_n(x.ptr(), x.size(), out.ptr() + begin * row);
}

}  // namespace

void SamplerConfig::validate(const NoiseSchedule& sched) const {
  if (steps == 0 || steps > sched.steps) {
    throw ArgumentError("sampler steps must be in [1, " + std::to_string(sched.steps) + "], got " + std::to_string(steps));
  }
  if (!(guidance >= 0.0)) throw ArgumentError("guidance scale must be nonnegative");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ArgumentError("eta must lie in [0, 1]");
  if (clip && !(*clip > 0.0)) throw ArgumentError("clip bound must be positive");
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"kind", c.kind == SamplerKind::Ddim ? "ddim" : "ddpm"},
                     {"steps", c.steps},
                     {"guidance", c.guidance},
                     {"eta", c.eta}};
  j["clip"] = c.clip ? nlohmann::json(*c.clip) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
  const std::string kind = j.value("kind", std::string("ddim"));
  if (kind != "ddim" && kind != "ddpm") throw ArgumentError("unknown sampler kind '" + kind + "'");
  c.kind = kind == "ddim" ? SamplerKind::Ddim : SamplerKind::Ddpm;
  c.steps = j.value("steps", std::size_t{25});
  c.guidance = j.value("guidance", 7.5);
  c.eta = j.value("eta", 0.0);
  if (j.contains("clip") && !j.at("clip").is_null()) {
    c.clip = j.at("clip").get<double>();
  } else {
    c.clip.reset();
  }
}

std::string sampler_digest(const SamplerConfig& c) { return util::sha256_hex(nlohmann::json(c).dump()); }

std::vector<std::size_t> step_grid(const NoiseSchedule& sched, std::size_t steps) {
  if (steps == 0 || steps > sched.steps) throw ArgumentError("inference steps out of range");
  if (steps == 1) return {sched.steps - 1};
  std::vector<std::size_t> grid(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    grid[i] = static_cast<std::size_t>(std::llround(double(i) * double(sched.steps - 1) / double(steps - 1)));
  }
  return grid;
}

Tensor cfg_predict(const DenoiserModel& model, const Tensor& x_t, std::span<const std::size_t> timesteps,
                   std::span<const Condition> conds, double w) {
  if (w == 1.0) return models::predict_eps(model, x_t, timesteps, conds);
  const std::size_t n = conds.size();
  const std::vector<Condition> nulls(n, Condition::null());
  if (w == 0.0) return models::predict_eps(model, x_t, timesteps, nulls);

  // One pass over [x; x] with [c; null]; rows are computed independently.
  std::vector<std::size_t> ts(timesteps.begin(), timesteps.end());
  ts.insert(ts.end(), timesteps.begin(), timesteps.end());
  std::vector<Condition> cs(conds.begin(), conds.end());
  cs.insert(cs.end(), nulls.begin(), nulls.end());
  const Tensor both = models::predict_eps(model, concat_rows(x_t, x_t), ts, cs);
  const std::size_t half = x_t.size();
  Tensor out(x_t.shape());
  const float wf = static_cast<float>(w);
  for (std::size_t k = 0; k < half; ++k) {
    const float uncond = both[half + k];
    out[k] = uncond + wf * (both[k] - uncond);
  }
  return out;
}

Tensor sample(const DenoiserModel& model, std::span<const Condition> conds, std::span<const std::uint64_t> seeds,
              const SamplerConfig& cfg, const NoiseSchedule& sched, const std::optional<SampleStart>& start) {
  cfg.validate(sched);
  if (conds.size() != seeds.size()) throw ArgumentError("sample: one seed per condition required");
  if (conds.empty()) throw ArgumentError("sample: no trajectories requested");
  const auto grid = step_grid(sched, cfg.steps);
  std::size_t first = grid.size() - 1;
  if (start) {
    const auto it = std::find(grid.begin(), grid.end(), start->t);
    if (it == grid.end()) {
      throw ArgumentError("sample: start timestep " + std::to_string(start->t) + " is not on the inference grid");
    }
    first = static_cast<std::size_t>(it - grid.begin());
    const std::size_t rows = start->x.dim(0);
    if ((rows != 1 && rows != conds.size()) || start->x.size() / rows != model.spec.input_size()) {
      throw ArgumentError("sample: start tensor " + num::shape_string(start->x.shape()) + " does not fit the model");
    }
  }
  num::Shape shape{conds.size()};
  shape.insert(shape.end(), model.spec.input_shape.begin(), model.spec.input_shape.end());
  Tensor out(shape);
  const std::size_t chunks = (conds.size() + kChunk - 1) / kChunk;
  num::parallel_for(chunks, [&](std::size_t ci) {
    const std::size_t b = ci * kChunk;
    run_chunk(model, conds, seeds, cfg, sched, grid, first, start, b, std::min(conds.size(), b + kChunk), out);
  });
  return out;
}

Tensor sample_one(const DenoiserModel& model, const Condition& c, const SamplerConfig& cfg, const NoiseSchedule& sched,
                  std::uint64_t seed, const std::optional<SampleStart>& start) {
  const Condition conds[] = {c};
  const std::uint64_t seeds[] = {seed};
  return sample(model, conds, seeds, cfg, sched, start);
}

}  // namespace rclab::diffusion
