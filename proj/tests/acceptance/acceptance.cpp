// Acceptance run: one PASS/FAIL line per criterion.
//
// usage: acceptance [work_dir]
// RCLAB_ACCEPTANCE_REUSE=1 skips pipeline steps whose output directory
// already holds an identical resolved manifest and its artifacts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rclab/cli/checkpoint.hpp"
#include "rclab/cli/commands.hpp"
#include "rclab/data/toy2d.hpp"
#include "rclab/distill/distill.hpp"
#include "rclab/eval/experiments.hpp"
#include "rclab/num/rng.hpp"
#include "rclab/util/binary_io.hpp"
#include "support/gradcheck.hpp"

using namespace rclab;
namespace fs = std::filesystem;
using nlohmann::json;
using clk = std::chrono::steady_clock;

namespace {

double seconds_since(clk::time_point t0) { return std::chrono::duration<double>(clk::now() - t0).count(); }

struct Outcome {
  int id = 0;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget = 0.0;
};

std::vector<Outcome> outcomes;

void report(int id, bool pass, const std::string& detail, double seconds, double budget) {
  const bool in_time = budget <= 0.0 || seconds <= budget;
  std::ostringstream s;
  s << detail << " [" << std::fixed;
  s.precision(1);
  s << seconds << " s";
  if (budget > 0.0) s << ", budget " << budget << " s";
  s << "]";
  outcomes.push_back({id, pass && in_time, s.str(), seconds, budget});
  std::printf("%s criterion %d: %s\n", pass && in_time ? "PASS" : "FAIL", id, s.str().c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Analytic criteria

void gradient_check() {
  const auto t0 = clk::now();
  models::DenoiserSpec ts;
  ts.input_shape = {2};
  ts.width = 8;
  ts.depth = 4;
  ts.cond_width = 4;
  ts.time_width = 8;
  ts.class_count = 4;
  ts.groups = 2;
  ts = models::with_all_taps(ts);
  auto ss = ts;
  ss.width = 6;
  ss.depth = 2;
  ss = models::with_all_taps(ss);
  auto teacher = models::build_model(ts, 1);
  auto student = models::build_model(ss, 2);
  // Zero-initialized layers would hide their input gradients.
  num::Rng rng(3);
  for (auto* ps : {&teacher.params, &student.params}) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      for (auto& v : ps->values(i)) v += static_cast<float>(0.3 * rng.normal());
    }
  }
  const auto heads = models::build_heads(ts, ss, 4);
  const num::ParamSet64 t64 = teacher.params.cast<double>();
  num::ParamSet64 s64 = student.params.cast<double>();
  num::ParamSet64 h64 = heads.params.cast<double>();
  num::Tensor64 x({4, 2});
  for (auto& v : x.data()) v = rng.normal();
  const std::vector<std::size_t> t{0, 250, 600, 999};
  const std::vector<models::Condition> c{models::Condition::labeled(0), models::Condition::labeled(3),
                                         models::Condition::null(), models::Condition::labeled(1)};
  distill::DistillConfig cfg;
  auto loss = [&](num::Tape<double>& tape) {
    return distill::distill_loss<double>(tape, ts, t64, ss, s64, heads.pairs, h64, x, t, c, cfg).total;
  };
  num::Tape<double> tape;
  tape.backward(loss(tape));
  const auto gs = tape.gradients(s64);
  const auto gh = tape.gradients(h64);
  const auto r = testing::finite_difference_check(
      {&s64, &h64}, {&gs, &gh},
      [&] {
        num::Tape<double> f(false);
        return f.value(loss(f))[0];
      },
      100, 5);
  report(1, r.probes == 100 && r.max_rel_error < 1e-6,
         "max relative gradient error " + fmt(r.max_rel_error, 3) + " over " + std::to_string(r.probes) +
             " probes (< 1e-6)",
         seconds_since(t0), 60.0);
}

void forward_marginals() {
  const auto t0 = clk::now();
  const auto sched = diffusion::build_schedule(1000);
  const auto full = data::circle_toy2d();
  data::Toy2DSpec one;
  one.means = {full.means[0]};
  one.covariances = {full.covariances[0]};
  const std::size_t n = 100000;
  const auto d = data::gen_toy2d(one, n, 21);
  const num::Tensor x0({n, 2}, d.pixels);
  double worst = 0.0;
  bool pass = true;
  for (std::size_t t : {250u, 500u, 750u}) {
    num::Tensor eps({n, 2});
    num::Rng rng(22, "marginals", {t});
    for (auto& v : eps.data()) v = static_cast<float>(rng.normal());
    const auto xt = diffusion::forward_diffuse(x0, t, eps, sched);
    // Closed form from an independent long-double product of (1 - beta).
    long double ab = 1.0L;
    for (std::size_t s = 0; s <= t; ++s) ab *= 1.0L - (1e-4L + (0.02L - 1e-4L) * s / 999.0L);
    const double a = static_cast<double>(ab);
    const double mu[2] = {std::sqrt(a) * full.means[0][0], std::sqrt(a) * full.means[0][1]};
    const auto& S = full.covariances[0];
    const double cov[4] = {a * S[0] + 1 - a, a * S[1], a * S[2], a * S[3] + 1 - a};
    double m[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      m[0] += xt[2 * i];
      m[1] += xt[2 * i + 1];
    }
    m[0] /= n;
    m[1] /= n;
    double c[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const double u = xt[2 * i] - m[0], v = xt[2 * i + 1] - m[1];
      c[0] += u * u;
      c[1] += u * v;
      c[3] += v * v;
    }
    c[2] = c[1];
    for (auto& v : c) v /= double(n - 1);
    const double mean_err = std::hypot(m[0] - mu[0], m[1] - mu[1]) / std::hypot(mu[0], mu[1]);
    double num = 0, den = 0;
    for (int k = 0; k < 4; ++k) {
      num += (c[k] - cov[k]) * (c[k] - cov[k]);
      den += cov[k] * cov[k];
    }
    const double cov_err = std::sqrt(num / den);
    worst = std::max({worst, mean_err, cov_err});
    pass = pass && mean_err < 0.02 && cov_err < 0.02;
  }
  report(2, pass, "worst relative error of mean/covariance " + fmt(worst, 3) + " at t in {250, 500, 750} (< 0.02)",
         seconds_since(t0), 60.0);
}

void overlap() {
  const auto t0 = clk::now();
  const auto sched = diffusion::build_schedule(1000);
  const auto rows = eval::overlap_curve(data::circle_toy2d(), 0, 1, sched);
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) monotone = monotone && rows[i].symmetric_kl <= rows[i - 1].symmetric_kl;
  const double ratio = rows.back().symmetric_kl / rows.front().symmetric_kl;
  report(3, monotone && ratio < 0.01,
         std::string(monotone ? "monotone" : "NOT monotone") + ", KL(T-1)/KL(0) = " + fmt(ratio, 3) + " (< 0.01)",
         seconds_since(t0), 1.0);
}

void frechet_units() {
  const auto t0 = clk::now();
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  const eval::GaussianStats a{Eigen::Vector2d(0, 0), I};
  const double same = eval::frechet(a, a);
  const double shifted = eval::frechet(a, {Eigen::Vector2d(3, 4), I});
  const double scaled = eval::frechet(a, {Eigen::Vector2d(0, 0), 4 * I});
  const double err = std::max({std::abs(same), std::abs(shifted - 25.0), std::abs(scaled - 2.0)});
  report(4, err < 1e-9,
         "FD values " + fmt(same, 3) + ", " + fmt(shifted, 17) + ", " + fmt(scaled, 17) + " (max error " +
             fmt(err, 3) + " < 1e-9)",
         seconds_since(t0), 1.0);
}

// ---------------------------------------------------------------------------
// Desk-scale reproduction through the command-line pipeline

class Lab {
 public:
  explicit Lab(fs::path root) : root_(std::move(root)) {
    const char* reuse = std::getenv("RCLAB_ACCEPTANCE_REUSE");
    reuse_ = reuse && std::string(reuse) == "1";
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  // Runs one command; returns its output directory.
  fs::path run(const std::string& name, json manifest, const fs::path& base = {}) {
    const fs::path out = (base.empty() ? root_ : base) / name;
    manifest["out"] = out.string();
    const fs::path mpath = (base.empty() ? root_ : base) / (name + ".json");
    if (!base.empty()) fs::create_directories(base);
    util::write_text(mpath, manifest.dump(2));
    if (reuse_ && fs::exists(out / "manifest.json") && fs::exists(out / ".done")) {
      const auto m = cli::resolve(cli::parse_manifest(manifest), {});
      if (util::read_text(out / "manifest.json") == cli::manifest_text(m)) {
        std::cerr << "[reuse] " << name << "\n";
        return out;
      }
    }
    const auto t0 = clk::now();
    std::ostringstream log;
    const int code = cli::run_command(manifest["command"].get<std::string>(), mpath, {}, log, std::cerr);
    if (code != cli::kExitOk) throw std::runtime_error(name + " exited with status " + std::to_string(code));
    util::write_text(out / ".done", "");
    std::cerr << "[run] " << name << " " << fmt(seconds_since(t0), 3) << " s\n";
    return out;
  }

 private:
  fs::path root_;
  bool reuse_ = false;
};

json ref(const fs::path& p) { return json{{"path", p.string()}}; }

json base_manifest(const std::string& command) {
  return json{
      {"command", command},
      {"seed", 20240},
      {"dataset",
       {{"kind", "glyphs"}, {"classes", 10}, {"styles", 8}, {"per_cell", 64}, {"image_size", 16}, {"seed", 7}}},
      {"teacher",
       {{"spec",
         {{"arch", "mlp"},
          {"input_shape", {1, 16, 16}},
          {"width", 384},
          {"depth", 6},
          {"cond_width", 32},
          {"time_width", 64},
          {"class_count", 10},
          {"groups", 8}}},
        {"training",
         {{"iterations", 5000},
          {"batch", 128},
          {"cosine_decay", true},
          {"optimizer", {{"lr", 1e-3}, {"weight_decay", 0.0}}}}}}},
      {"student",
       {{"spec",
         {{"arch", "mlp"},
          {"input_shape", {1, 16, 16}},
          {"width", 384},
          {"depth", 3},
          {"cond_width", 32},
          {"time_width", 64},
          {"class_count", 10},
          {"groups", 8}}},
        {"init", "random"}}},
      {"distill",
       {{"iterations", 2000},
        {"batch", 128},
        {"cosine_decay", true},
        {"log_every", 500},
        {"optimizer", {{"lr", 1e-3}, {"weight_decay", 0.0}}},
        {"policy", {{"kind", "off"}}}}},
      {"cache", {{"per_condition", 1000}, {"exclude", {3}}}},
      {"sampler", {{"kind", "ddim"}, {"steps", 25}, {"guidance", 2.0}, {"clip", 1.0}}},
      {"eval", {{"samples_per_condition", 256}, {"unseen", {3}}, {"sheet_columns", 8}}},
      {"swap", {{"pairs", 256}}}};
}

struct Fidelity {
  double seen = 0, unseen = 0, overall = 0;
};

Fidelity read_report(const fs::path& dir) {
  const auto r = eval::report_from_json(json::parse(util::read_text(dir / "report.json")));
  return {r.split.seen, r.split.unseen, r.split.overall};
}

std::string pct(double v) { return fmt(100.0 * v, 3); }

bool same_bytes(const fs::path& a, const fs::path& b) { return util::read_file(a) == util::read_file(b); }

void pipeline(Lab& lab) {
  // Shared setup: the teacher, not charged to any single criterion.
  auto t0 = clk::now();
  const fs::path teacher_dir = lab.run("teacher", base_manifest("train-teacher"));
  const fs::path teacher = teacher_dir / "teacher.ckpt";
  std::printf("setup: glyph teacher trained in %.1f s\n", seconds_since(t0));
  std::fflush(stdout);

  // Criterion 5.
  t0 = clk::now();
  json sw = base_manifest("swap-exp");
  sw["inputs"] = {{"model", ref(teacher)}};
  const fs::path swap_dir = lab.run("swap", sw);
  const fs::path classifier = swap_dir / "classifier.rccl";
  {
    const auto cells = json::parse(util::read_text(swap_dir / "swap.json"))["cells"];
    const double T = 1000.0;
    double min_cond_high = 1.0, min_orig_low = 1.0;
    bool monotone = true;
    double prev = -1.0;
    for (const auto& c : cells) {
      const double t = c["t"].get<double>();
      if (t >= 0.9 * T) min_cond_high = std::min(min_cond_high, c["follows_condition"].get<double>());
      if (t <= 0.1 * T) min_orig_low = std::min(min_orig_low, c["follows_original"].get<double>());
      const double s = c["follows_condition_smoothed"].get<double>();
      monotone = monotone && s >= prev;
      prev = s;
    }
    const auto acc = cli::load_classifier(classifier).held_out_accuracy;
    report(5, min_cond_high >= 0.8 && min_orig_low >= 0.8 && monotone,
           "min follows-condition at t>=0.9T " + fmt(min_cond_high) + " (>= 0.8), min follows-original at t<=0.1T " +
               fmt(min_orig_low) + " (>= 0.8), smoothed curve " + (monotone ? "monotone" : "NOT monotone") +
               ", 256 pairs/cell, classifier held-out accuracy " + fmt(acc),
           seconds_since(t0), 15 * 60.0);
  }

  auto distill = [&](const std::string& name, const json& policy, const std::string& init, double fraction,
                     const fs::path& cache, const fs::path& base = {}) {
    json d = base_manifest("distill");
    d["distill"]["policy"] = policy;
    d["student"]["init"] = init;
    d["source"] = {{"kind", "cache"}, {"fraction", fraction}};
    d["inputs"] = {{"teacher", ref(teacher)}, {"cache", ref(cache)}};
    const fs::path out = lab.run(name, d, base);
    json e = base_manifest("eval");
    e["inputs"] = {{"model", ref(out / "student.ckpt")}, {"classifier", ref(classifier)}};
    lab.run(name + "_eval", e, base);
    return (base.empty() ? lab.root() : base) / (name + "_eval");
  };

  const json off = {{"kind", "off"}};
  const json expo = {{"kind", "exponential"}, {"lambda", 5.0}};

  // Criterion 6.
  t0 = clk::now();
  json gc = base_manifest("gen-cache");
  gc["inputs"] = {{"teacher", ref(teacher)}};
  const fs::path cache = lab.run("cache", gc) / "cache.rcc";
  const auto f_off = read_report(distill("off", off, "random", 1.0, cache));
  const auto f_exp = read_report(distill("exponential", expo, "random", 1.0, cache));
  report(6, f_exp.unseen - f_off.unseen >= 0.30 && f_off.unseen < 0.30,
         "class-3 fidelity random conditioning " + pct(f_exp.unseen) + "% vs off " + pct(f_off.unseen) +
             "% (gap >= 30 points, off < 30%)",
         seconds_since(t0), 45 * 60.0);

  // Criterion 7.
  t0 = clk::now();
  const std::vector<std::pair<std::string, json>> schedules{
      {"mirrored", {{"kind", "mirrored"}, {"lambda", 5.0}}},
      {"linear", {{"kind", "linear"}}},
      {"sigmoid", {{"kind", "sigmoid"}, {"slope", 20.0}, {"center", 0.7}}},
      {"constant_0.5", {{"kind", "constant"}, {"p", 0.5}}},
      {"constant_1.0", {{"kind", "constant"}, {"p", 1.0}}}};
  std::map<std::string, Fidelity> table{{"exponential", f_exp}};
  for (const auto& [name, policy] : schedules) table[name] = read_report(distill(name, policy, "random", 1.0, cache));
  bool seen_ok = true, some_better = false;
  std::string detail = "off seen " + pct(f_off.seen) + " unseen " + pct(f_off.unseen) + ";";
  for (const auto& [name, f] : table) {
    if (name != "constant_1.0") seen_ok = seen_ok && f.seen >= f_off.seen - 0.02;
    some_better = some_better || f.unseen > f_off.unseen;
    detail += " " + name + " " + pct(f.seen) + "/" + pct(f.unseen);
  }
  report(7, seen_ok && some_better,
         detail + " (seen >= off - 2 points except constant 1.0; some unseen > off)", seconds_since(t0), 3 * 3600.0);

  // Criterion 8.
  t0 = clk::now();
  const auto f_small = read_report(distill("exponential_10pct", expo, "random", 0.1, cache));
  report(8, f_small.overall >= f_off.overall,
         "seen+unseen fidelity with 10% cache and random conditioning " + pct(f_small.overall) +
             "% vs off with full cache " + pct(f_off.overall) + "%",
         seconds_since(t0), 3600.0);

  // Criterion 9.
  t0 = clk::now();
  const auto t_off = read_report(distill("teacher_init_off", off, "teacher", 1.0, cache));
  const auto t_exp = read_report(distill("teacher_init_exponential", expo, "teacher", 1.0, cache));
  const double margin_t = t_exp.unseen - t_off.unseen;
  const double margin_r = f_exp.unseen - f_off.unseen;
  report(9, margin_t >= 0.0 && margin_r >= 0.0,
         "unseen margin from random conditioning: teacher init " + pct(margin_t) + " points (" + pct(t_exp.unseen) +
             " vs " + pct(t_off.unseen) + "), random init " + pct(margin_r) + " points (" + pct(f_exp.unseen) +
             " vs " + pct(f_off.unseen) + ")",
         seconds_since(t0), 1.5 * 3600.0);

  json rp = base_manifest("report");
  rp["inputs"] = json::object();
  for (const auto& name : {"off", "exponential", "mirrored", "linear", "sigmoid", "constant_0.5", "constant_1.0",
                           "exponential_10pct", "teacher_init_off", "teacher_init_exponential"}) {
    rp["inputs"][name] = ref(lab.root() / (std::string(name) + "_eval") / "report.json");
  }
  lab.run("report", rp);

  // Criterion 10: rerun manifests from scratch into a fresh tree.
  t0 = clk::now();
  const fs::path again = lab.root() / "rerun";
  fs::remove_all(again);
  Lab fresh(again);
  bool identical = true;
  std::string mismatches;
  auto compare = [&](const fs::path& a, const fs::path& b) {
    if (!same_bytes(a, b)) {
      identical = false;
      mismatches += " " + a.filename().string();
    }
  };
  const fs::path cache2 = fresh.run("cache", gc) / "cache.rcc";
  compare(cache, cache2);
  const fs::path off2 = distill("off", off, "random", 1.0, cache2, again);
  compare(lab.root() / "off" / "student.ckpt", again / "off" / "student.ckpt");
  compare(lab.root() / "off" / "history.csv", again / "off" / "history.csv");
  compare(lab.root() / "off_eval" / "report.json", off2 / "report.json");
  compare(lab.root() / "off_eval" / "report.csv", off2 / "report.csv");
  const fs::path swap2 = fresh.run("swap", sw);
  compare(swap_dir / "swap.json", swap2 / "swap.json");
  compare(classifier, swap2 / "classifier.rccl");
  report(10, identical,
         identical ? "cache, student checkpoint, history, reports, swap table and classifier bit-identical on rerun"
                   : "mismatch in" + mismatches,
         seconds_since(t0), 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_work";
  std::printf("acceptance work directory: %s\n", work.string().c_str());
  std::fflush(stdout);
  const auto t0 = clk::now();

  const std::vector<std::pair<int, std::function<void()>>> analytic{
      {1, gradient_check}, {2, forward_marginals}, {3, overlap}, {4, frechet_units}};
  for (const auto& [id, check] : analytic) {
    try {
      check();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what(), 0.0, 0.0);
    }
  }
  try {
    Lab lab(work);
    pipeline(lab);
  } catch (const std::exception& e) {
    std::printf("pipeline aborted: %s\n", e.what());
    for (int id = 5; id <= 10; ++id) {
      bool seen = false;
      for (const auto& o : outcomes) seen = seen || o.id == id;
      if (!seen) report(id, false, "not reached", 0.0, 0.0);
    }
  }

  int failed = 0;
  for (const auto& o : outcomes) failed += !o.pass;
  std::printf("%zu criteria, %d failed, %.1f s total\n", outcomes.size(), failed, seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
