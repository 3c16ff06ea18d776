#include <cmath>

#include "doctest.h"
#include "rclab/diffusion/sampler.hpp"
#include "rclab/errors.hpp"
#include "rclab/num/rng.hpp"

using namespace rclab;
using namespace rclab::diffusion;
using models::Condition;

namespace {

models::DenoiserModel toy_model(std::uint64_t seed) {
  models::DenoiserSpec s;
  s.input_shape = {2};
  s.width = 16;
  s.depth = 2;
  s.cond_width = 8;
  s.time_width = 8;
  s.class_count = 4;
  s.groups = 4;
  auto m = models::build_model(s, seed);
  // Zero-initialized output layers would make every prediction condition-free.
  num::Rng rng(seed, "perturb");
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    for (auto& v : m.params.values(i)) v += static_cast<float>(0.3 * rng.normal());
  }
  return m;
}

}  // namespace

TEST_CASE("linear schedule") {
  SUBCASE("default table") {
    const auto s = build_schedule(1000, 1e-4, 0.02);
    REQUIRE(s.alpha_bar.size() == 1000);
    for (std::size_t t = 1; t < 1000; ++t) CHECK(s.alpha_bar[t] < s.alpha_bar[t - 1]);
    // Independent oracle: direct product in long double.
    long double prod = 1.0L;
    for (int t = 0; t < 1000; ++t) {
      const long double beta = 1e-4L + (0.02L - 1e-4L) * t / 999.0L;
      prod *= 1.0L - beta;
      CHECK(std::abs(s.alpha_bar[t] - double(prod)) < 1e-6);
    }
    CHECK(s.alpha_bar[999] == doctest::Approx(4.0e-5).epsilon(0.02));
  }

  SUBCASE("two steps") {
    const auto s = build_schedule(2, 0.5, 0.5);
    CHECK(s.alpha_bar[0] == 0.5);
    CHECK(s.alpha_bar[1] == 0.25);
  }

  SUBCASE("invalid arguments") {
    CHECK_THROWS_AS(build_schedule(1000, 0.02, 1e-4), ArgumentError);
    CHECK_THROWS_AS(build_schedule(1, 1e-4, 0.02), ArgumentError);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.02), ArgumentError);
    CHECK_THROWS_AS(build_schedule(10, 1e-4, 1.0), ArgumentError);
  }
}

TEST_CASE("forward_diffuse") {
  SUBCASE("direct substitution") {
    const auto s = build_schedule(2, 0.5, 0.5);
    const num::Tensor64 x0(num::Shape{2}, std::vector<double>{2.0, 0.0});
    const num::Tensor64 eps(num::Shape{2}, std::vector<double>{1.0, 1.0});
    const auto xt = forward_diffuse(x0, 1, eps, s);
    CHECK(xt[0] == doctest::Approx(1.0 + std::sqrt(0.75)).epsilon(1e-15));
    CHECK(xt[1] == doctest::Approx(std::sqrt(0.75)).epsilon(1e-15));
  }

  SUBCASE("alpha_bar near one keeps x0") {
    const auto s = build_schedule(10, 1e-12, 1e-12);
    const num::Tensor64 x0(num::Shape{2}, std::vector<double>{0.3, -1.2});
    const num::Tensor64 eps(num::Shape{2}, std::vector<double>{1.0, -1.0});
    const auto xt = forward_diffuse(x0, 0, eps, s);
    CHECK(xt[0] == doctest::Approx(0.3).epsilon(1e-5));
    CHECK(xt[1] == doctest::Approx(-1.2).epsilon(1e-5));
  }

  SUBCASE("shape mismatch") {
    const auto s = build_schedule(10);
    CHECK_THROWS_AS(forward_diffuse(num::Tensor(num::Shape{2}), 0, num::Tensor(num::Shape{3}), s), ArgumentError);
    CHECK_THROWS_AS(forward_diffuse(num::Tensor(num::Shape{2}), 10, num::Tensor(num::Shape{2}), s), ArgumentError);
  }

  SUBCASE("Monte-Carlo moments") {
    const auto s = build_schedule(1000);
    const std::size_t n = 100000;
    const std::size_t t = 300;
    const double ab = s.alpha_bar[t];
    num::Rng rng(42);
    num::Tensor64 x0(num::Shape{n, 2}), eps(num::Shape{n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      x0[2 * i] = 1.5;
      x0[2 * i + 1] = -2.0;
      eps[2 * i] = rng.normal();
      eps[2 * i + 1] = rng.normal();
    }
    const auto xt = forward_diffuse(x0, t, eps, s);
    double m[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      m[0] += xt[2 * i];
      m[1] += xt[2 * i + 1];
    }
    m[0] /= n;
    m[1] /= n;
    double v[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      v[0] += (xt[2 * i] - m[0]) * (xt[2 * i] - m[0]);
      v[1] += (xt[2 * i + 1] - m[1]) * (xt[2 * i + 1] - m[1]);
    }
    CHECK(m[0] == doctest::Approx(std::sqrt(ab) * 1.5).epsilon(0.02));
    CHECK(m[1] == doctest::Approx(std::sqrt(ab) * -2.0).epsilon(0.02));
    CHECK(v[0] / (n - 1) == doctest::Approx(1.0 - ab).epsilon(0.02));
    CHECK(v[1] / (n - 1) == doctest::Approx(1.0 - ab).epsilon(0.02));
  }
}

TEST_CASE("cfg_predict") {
  const auto m = toy_model(1);
  num::Rng rng(2);
  Tensor x(num::Shape{3, 2});
  for (auto& v : x.data()) v = static_cast<float>(rng.normal());
  const std::vector<std::size_t> ts{10, 400, 990};
  const std::vector<Condition> cs{Condition::labeled(0), Condition::labeled(3), Condition::labeled(1)};
  const std::vector<Condition> nulls(3, Condition::null());
  const Tensor cond = models::predict_eps(m, x, ts, cs);
  const Tensor uncond = models::predict_eps(m, x, ts, nulls);

  CHECK(cfg_predict(m, x, ts, cs, 0.0) == uncond);
  CHECK(cfg_predict(m, x, ts, cs, 1.0) == cond);
  const Tensor g = cfg_predict(m, x, ts, cs, 7.5);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double expect = double(uncond[k]) + 7.5 * (double(cond[k]) - double(uncond[k]));
    CHECK(g[k] == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("sampling") {
  const auto m = toy_model(3);
  const auto sched = build_schedule(1000);
  SamplerConfig cfg;
  cfg.steps = 10;
  cfg.guidance = 2.0;

  SUBCASE("step grid") {
    const auto g = step_grid(sched, 25);
    CHECK(g.front() == 0);
    CHECK(g.back() == 999);
    CHECK(g.size() == 25);
    CHECK(step_grid(sched, 1) == std::vector<std::size_t>{999});
  }

  SUBCASE("DDIM eta 0 is deterministic") {
    const Tensor a = sample_one(m, Condition::labeled(2), cfg, sched, 77);
    const Tensor b = sample_one(m, Condition::labeled(2), cfg, sched, 77);
    CHECK(a == b);
    CHECK_FALSE(a == sample_one(m, Condition::labeled(2), cfg, sched, 78));
  }

  SUBCASE("trajectories do not depend on batch composition") {
    cfg.kind = SamplerKind::Ddpm;
    std::vector<Condition> cs;
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < 70; ++i) {
      cs.push_back(Condition::labeled(i % 4));
      seeds.push_back(1000 + i);
    }
    const Tensor all = sample(m, cs, seeds, cfg, sched);
    for (std::size_t i : {0u, 33u, 69u}) {
      const Tensor one = sample_one(m, cs[i], cfg, sched, seeds[i]);
      CHECK(one[0] == all[2 * i]);
      CHECK(one[1] == all[2 * i + 1]);
    }
  }

  SUBCASE("start at the grid minimum returns the one-shot x0 estimate") {
    Tensor x(num::Shape{1, 2}, std::vector<float>{0.4f, -0.9f});
    const Tensor out = sample_one(m, Condition::labeled(1), cfg, sched, 5, SampleStart{x, 0});
    const std::size_t t0[] = {0};
    const Condition c[] = {Condition::labeled(1)};
    const Tensor eps = cfg_predict(m, x, t0, c, cfg.guidance);
    const double ab = sched.alpha_bar[0];
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(out[k] == doctest::Approx((x[k] - std::sqrt(1 - ab) * eps[k]) / std::sqrt(ab)).epsilon(1e-5));
    }
  }

  SUBCASE("off-grid start") {
    Tensor x(num::Shape{1, 2});
    CHECK_THROWS_AS(sample_one(m, Condition::labeled(1), cfg, sched, 5, SampleStart{x, 5}), ArgumentError);
  }

  SUBCASE("invalid config") {
    cfg.steps = 1001;
    CHECK_THROWS_AS(sample_one(m, Condition::labeled(1), cfg, sched, 5), ArgumentError);
    cfg.steps = 10;
    cfg.eta = 1.5;
    CHECK_THROWS_AS(sample_one(m, Condition::labeled(1), cfg, sched, 5), ArgumentError);
  }

  SUBCASE("config round trip") {
    cfg.clip = 1.0;
    const nlohmann::json j = cfg;
    CHECK(j.get<SamplerConfig>() == cfg);
    CHECK(sampler_digest(cfg) == sampler_digest(j.get<SamplerConfig>()));
  }
}
