#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "rclab/data/glyphs.hpp"
#include "rclab/errors.hpp"
#include "rclab/eval/experiments.hpp"
#include "rclab/num/rng.hpp"

using namespace rclab;
using namespace rclab::eval;
using models::Condition;

namespace {

GaussianStats gauss(Eigen::VectorXd mean, Eigen::MatrixXd cov) { return {std::move(mean), std::move(cov)}; }

const TrainedClassifier& glyph_classifier() {
  static const TrainedClassifier tc = [] {
    ClassifierConfig cfg;
    cfg.iterations = 2000;
    cfg.seed = 3;
    return train_fidelity_classifier(data::class_labels_only(data::render_glyphs(10, 8, 12, 21)), cfg);
  }();
  return tc;
}

Tensor stack(const data::PairedDataset& d, std::size_t begin, std::size_t end, std::size_t stride = 1) {
  std::vector<std::size_t> idx;
  for (std::size_t i = begin; i < end; i += stride) idx.push_back(i);
  return d.gather(idx);
}

}  // namespace

TEST_CASE("frechet unit values") {
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  const auto a = gauss(Eigen::Vector2d(0, 0), I);
  CHECK(std::abs(frechet(a, a)) < 1e-9);
  CHECK(std::abs(frechet(a, gauss(Eigen::Vector2d(3, 4), I)) - 25.0) < 1e-9);
  CHECK(std::abs(frechet(a, gauss(Eigen::Vector2d(0, 0), 4 * I)) - 2.0) < 1e-9);
  CHECK_THROWS_AS(frechet(a, gauss(Eigen::Vector3d(0, 0, 0), Eigen::Matrix3d::Identity())), ArgumentError);
}

TEST_CASE("frechet is symmetric and nonnegative") {
  num::Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd ma(3, 3), mb(3, 3);
    Eigen::VectorXd ua(3), ub(3);
    for (int i = 0; i < 9; ++i) {
      ma.data()[i] = rng.normal();
      mb.data()[i] = rng.normal();
    }
    for (int i = 0; i < 3; ++i) {
      ua[i] = rng.normal();
      ub[i] = rng.normal();
    }
    const auto a = gauss(ua, ma * ma.transpose());
    const auto b = gauss(ub, mb * mb.transpose());
    CHECK(frechet(a, b) >= 0.0);
    CHECK(frechet(a, b) == doctest::Approx(frechet(b, a)).epsilon(1e-9));
    CHECK(std::abs(frechet(a, a)) < 1e-9);
  }
}

TEST_CASE("fit_gaussian") {
  const std::vector<double> rows{0, 0, 2, 0, 0, 2, 2, 2};
  const auto s = fit_gaussian(rows, 2);
  CHECK(s.mean[0] == 1.0);
  CHECK(s.mean[1] == 1.0);
  CHECK(s.cov(0, 0) == doctest::Approx(4.0 / 3.0));
  CHECK(s.cov(0, 1) == 0.0);
  CHECK_THROWS_AS(fit_gaussian(std::vector<double>{1, 2}, 2), ArgumentError);
}

TEST_CASE("fidelity classifier") {
  SUBCASE("glyphs") {
    const auto& tc = glyph_classifier();
    CHECK(tc.held_out_count > 0);
    CHECK(tc.held_out_accuracy >= 0.95);
  }

  SUBCASE("Toy2D") {
    ClassifierConfig cfg;
    cfg.hidden = 32;
    cfg.feature_width = 16;
    cfg.iterations = 500;
    const auto tc = train_fidelity_classifier(data::gen_toy2d(data::circle_toy2d(), 200, 2), cfg);
    CHECK(tc.held_out_accuracy >= 0.99);
    const auto again = train_fidelity_classifier(data::gen_toy2d(data::circle_toy2d(), 200, 2), cfg);
    CHECK(again.classifier.params == tc.classifier.params);
  }

  SUBCASE("single class") {
    data::PairedDataset d;
    d.item_shape = {2};
    for (int i = 0; i < 10; ++i) d.push_back(std::vector<float>{float(i), 0.f}, Condition::labeled(1));
    CHECK_THROWS_AS(train_fidelity_classifier(d, {}), ArgumentError);
  }
}

TEST_CASE("feature_frechet") {
  const auto& fc = glyph_classifier().classifier;
  const auto g = data::render_glyphs(10, 8, 16, 99);
  const auto zeros = data::exclude_conditions(g, [](const Condition& c) { return c.class_id != 0; }).kept;
  const auto ones = data::exclude_conditions(g, [](const Condition& c) { return c.class_id != 1; }).kept;
  REQUIRE(zeros.size() == 128);

  SUBCASE("same samples give zero") {
    const Tensor z = stack(zeros, 0, 128);
    CHECK(std::abs(feature_frechet(z, z, fc)) < 1e-6);
  }

  SUBCASE("different classes are further apart than halves of one class") {
    const double across = feature_frechet(stack(zeros, 0, 128), stack(ones, 0, 128), fc);
    const double within = feature_frechet(stack(zeros, 0, 64), stack(zeros, 64, 128), fc);
    CHECK(across > within);
  }

  SUBCASE("estimate is stable when doubling the sample count") {
    const auto a = data::render_glyphs(10, 8, 8, 1);
    auto b = data::render_glyphs(10, 8, 8, 2);
    num::Rng rng(7);
    for (auto& v : b.pixels) v = std::clamp(v + 0.5f * static_cast<float>(rng.normal()), -1.0f, 1.0f);
    const double small = feature_frechet(stack(a, 0, 640, 2), stack(b, 0, 640, 2), fc);
    const double big = feature_frechet(stack(a, 0, 640), stack(b, 0, 640), fc);
    CHECK(std::abs(big - small) < 0.1 * big);
  }

  SUBCASE("too few samples") {
    CHECK_THROWS_AS(feature_frechet(stack(zeros, 0, 10), stack(zeros, 0, 10), fc), ArgumentError);
  }
}

TEST_CASE("condition fidelity of an untrained model is at chance") {
  const auto& fc = glyph_classifier().classifier;
  models::DenoiserSpec spec;
  spec.input_shape = {1, 16, 16};
  spec.width = 32;
  spec.depth = 1;
  spec.class_count = 10;
  spec.groups = 4;
  const auto m = models::build_model(spec, 1);
  const auto sched = diffusion::build_schedule(1000);
  diffusion::SamplerConfig sc;
  sc.steps = 5;
  sc.clip = 1.0;
  std::vector<Condition> conds;
  for (std::uint32_t c = 0; c < 10; ++c) conds.push_back(Condition::labeled(c));
  const std::size_t n = 40;
  const auto rows = condition_fidelity(m, conds, n, fc, sc, sched, 5);
  REQUIRE(rows.size() == 10);
  double mean = 0;
  for (const auto& r : rows) mean += r.fidelity();
  mean /= 10;
  const double sigma = std::sqrt(0.1 * 0.9 / double(10 * n));
  CHECK(std::abs(mean - 0.1) < 3 * sigma);
  CHECK(condition_fidelity(m, conds, 0, fc, sc, sched, 5).empty());
}

TEST_CASE("swap experiment bookkeeping") {
  const auto& fc = glyph_classifier().classifier;
  models::DenoiserSpec spec;
  spec.input_shape = {1, 16, 16};
  spec.width = 32;
  spec.depth = 1;
  spec.class_count = 10;
  spec.groups = 4;
  const auto m = models::build_model(spec, 1);
  const auto sched = diffusion::build_schedule(1000);
  diffusion::SamplerConfig sc;
  sc.steps = 5;
  sc.clip = 1.0;
  const auto g = data::render_glyphs(10, 1, 2, 4);
  std::vector<SwapPair> pairs;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = g.conditions[i].class_only();
    pairs.push_back({{g.item(i).begin(), g.item(i).end()}, c, Condition::labeled((c.class_id + 1) % 10)});
  }
  const auto grid = diffusion::step_grid(sched, sc.steps);
  const auto cells = swap_experiment(m, grid, pairs, fc, sc, sched, 1);
  REQUIRE(cells.size() == grid.size());
  for (const auto& c : cells) {
    CHECK(c.follows_original + c.follows_condition + c.other == doctest::Approx(1.0));
  }
  // At t = 0 the one-shot estimate is the source image itself.
  CHECK(cells.front().follows_original >= 0.8);
  const std::size_t off[] = {7};
  CHECK_THROWS_AS(swap_experiment(m, off, pairs, fc, sc, sched, 1), ArgumentError);
  pairs[0].target = pairs[0].original;
  CHECK_THROWS_AS(swap_experiment(m, grid, pairs, fc, sc, sched, 1), ArgumentError);
}

TEST_CASE("smooth") {
  const std::vector<double> v{0, 3, 0, 3};
  const auto s = smooth(v, 3);
  CHECK(s[0] == 1.5);
  CHECK(s[1] == 1.0);
  CHECK(s[2] == 2.0);
  CHECK(s[3] == 1.5);
}

TEST_CASE("overlap curve") {
  const auto spec = data::circle_toy2d();
  const auto sched = diffusion::build_schedule(1000);
  const auto rows = overlap_curve(spec, 0, 4, sched);
  REQUIRE(rows.size() == 1000);
  for (std::size_t t = 1; t < rows.size(); ++t) {
    CHECK(rows[t].symmetric_kl <= rows[t - 1].symmetric_kl);
    CHECK(rows[t].w2 <= rows[t - 1].w2);
  }
  CHECK(rows.back().symmetric_kl < 0.01 * rows.front().symmetric_kl);
  CHECK(rows.back().symmetric_kl < 1e-2);
  // Isotropic, equal covariances: sym KL = |d|^2 / v and W2^2 = |d|^2.
  const double ab = rows[200].alpha_bar;
  const double d2 = 64.0 * ab;
  const double v = ab * 0.05 + 1.0 - ab;
  CHECK(rows[200].symmetric_kl == doctest::Approx(d2 / v).epsilon(1e-9));
  CHECK(rows[200].w2 == doctest::Approx(d2).epsilon(1e-9));
  const std::size_t t0[] = {0};
  CHECK(overlap_curve(spec, 2, 2, sched, t0)[0].symmetric_kl == doctest::Approx(0.0));
}

TEST_CASE("report splits and serialization") {
  EvalReport r;
  r.name = "run";
  for (std::uint32_t c = 0; c < 4; ++c) r.fidelity.push_back({Condition::labeled(c), 10, 2 * c});
  r.seen = {Condition::labeled(0), Condition::labeled(1), Condition::labeled(2)};
  r.split = split_fidelity(r.fidelity, r.seen);
  CHECK(r.split.seen_conditions + r.split.unseen_conditions == 4);
  CHECK(r.split.seen == doctest::Approx(0.2));
  CHECK(r.split.unseen == doctest::Approx(0.6));
  CHECK(r.split.overall == doctest::Approx(0.3));
  r.frechet["teacher"] = 1.5;
  const auto back = report_from_json(report_json(r));
  CHECK(report_json(back) == report_json(r));
  CHECK_FALSE(report_json(r).contains("wall_clock_seconds"));
  const std::string csv = report_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 + 3 + 1);
}
