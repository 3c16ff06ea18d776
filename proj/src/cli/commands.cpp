#include "rclab/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "rclab/cli/checkpoint.hpp"
#include "rclab/cli/sample_sheet.hpp"
#include "rclab/data/cache.hpp"
#include "rclab/data/glyphs.hpp"
#include "rclab/data/idx.hpp"
#include "rclab/data/toy2d.hpp"
#include "rclab/eval/experiments.hpp"
#include "rclab/num/rng.hpp"
#include "rclab/util/binary_io.hpp"

namespace rclab::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using models::Condition;

namespace {

template <class F>
auto phase(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ArtifactError&) {
    throw;
  } catch (const ManifestError&) {
    throw;
  } catch (const NumericError& e) {
    throw PhaseError(name, e.what(), true);
  } catch (const Error& e) {
    throw PhaseError(name, e.what(), false);
  }
}

bool contains(const std::vector<std::uint32_t>& v, std::uint32_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

// The conditions a model was built for, in class-major order.
std::vector<Condition> condition_universe(const models::DenoiserSpec& spec) {
  std::vector<Condition> out;
  for (std::uint32_t c = 0; c < spec.class_count; ++c) {
    if (spec.style_count == 0) {
      out.push_back(Condition::labeled(c));
    } else {
      for (std::uint32_t s = 0; s < spec.style_count; ++s) out.push_back(Condition::composite(c, s));
    }
  }
  return out;
}

models::DenoiserModel load_model(const RunManifest& m, const std::string& name) {
  const auto& ref = m.inputs.at(name);
  try {
    return load_checkpoint(ref.path).model;
  } catch (const Error& e) {
    throw ArtifactError(name, e.what());
  }
}

eval::TrainedClassifier obtain_classifier(const RunManifest& m, const data::PairedDataset& d, std::ostream& log) {
  if (m.inputs.contains("classifier")) {
    try {
      return load_classifier(m.inputs.at("classifier").path);
    } catch (const Error& e) {
      throw ArtifactError("classifier", e.what());
    }
  }
  return phase("classifier", [&] {
    eval::ClassifierConfig cfg = m.classifier;
    // Tied to the data rather than the run so evaluations of different runs
    // share one classifier.
    cfg.seed = num::derive_seed(m.dataset.seed, "classifier");
    auto tc = eval::train_fidelity_classifier(data::class_labels_only(d), cfg);
    log << "classifier held-out accuracy " << tc.held_out_accuracy << " on " << tc.held_out_count << " examples\n";
    save_classifier(tc, fs::path(m.out) / "classifier.rccl");
    return tc;
  });
}

bool is_image(const num::Shape& s) { return s.size() == 3 && s[0] == 1; }

void write_sheet(const models::DenoiserModel& model, const RunManifest& m, const diffusion::NoiseSchedule& sched,
                 const fs::path& path) {
  if (!is_image(model.spec.input_shape) || m.eval.sheet_columns == 0) return;
  // One row per class; the same seeds for every model so sheets compare.
  const std::size_t rows = std::min<std::size_t>(model.spec.class_count, 10);
  std::vector<Condition> conds;
  std::vector<std::uint64_t> seeds;
  for (std::uint32_t c = 0; c < rows; ++c) {
    for (std::size_t i = 0; i < m.eval.sheet_columns; ++i) {
      conds.push_back(model.spec.style_count == 0 ? Condition::labeled(c)
                                                  : Condition::composite(c, std::uint32_t(i % model.spec.style_count)));
      seeds.push_back(num::derive_seed(m.seed, "sheet", {i}));
    }
  }
  emit_sample_sheet(diffusion::sample(model, conds, seeds, m.sampler, sched), rows, m.eval.sheet_columns, path);
}

void write_text(const fs::path& path, const std::string& text) { util::write_text(path, text); }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void train_teacher_cmd(const RunManifest& m, const diffusion::NoiseSchedule& sched, std::ostream& log) {
  const auto d = phase("load", [&] { return load_dataset(m.dataset); });
  distill::TeacherConfig cfg = m.teacher_training;
  cfg.seed = num::derive_seed(m.seed, "teacher");
  std::string csv = "iteration,loss\n";
  const std::size_t every = std::max<std::size_t>(1, m.distill.log_every);
  const distill::Progress progress{every, [&](std::size_t i, double loss) {
                                     csv += std::to_string(i) + "," + fmt(loss) + "\n";
                                     log << "train-teacher iteration " << i << " loss " << loss << "\n";
                                   }};
  const auto teacher = phase("train", [&] { return distill::train_teacher(d, m.teacher, cfg, sched, progress); });
  phase("write", [&] {
    save_checkpoint(teacher, {"teacher", cfg.iterations, manifest_digest(m)}, fs::path(m.out) / "teacher.ckpt");
    write_text(fs::path(m.out) / "train_log.csv", csv);
  });
  phase("sample", [&] { write_sheet(teacher, m, sched, fs::path(m.out) / "samples.pgm"); });
}

void gen_cache_cmd(const RunManifest& m, const diffusion::NoiseSchedule& sched, std::ostream& log) {
  const auto teacher = load_model(m, "teacher");
  std::vector<Condition> conds;
  for (const auto& c : condition_universe(teacher.spec)) {
    if (!contains(m.cache.exclude, c.class_id)) conds.push_back(c);
  }
  if (conds.empty()) throw ManifestError("cache.exclude", "excludes every condition");
  log << "gen-cache " << conds.size() << " conditions x " << m.cache.per_condition << "\n";
  const auto cache = phase("sample", [&] {
    return data::generate_cache(teacher, m.inputs.at("teacher").sha256, conds, m.cache.per_condition, m.sampler, sched,
                                num::derive_seed(m.seed, "cache"));
  });
  phase("write", [&] {
    data::cache_write(cache, fs::path(m.out) / "cache.rcc");
    if (is_image(cache.item_shape)) {
      const std::size_t cols = std::max<std::size_t>(1, m.eval.sheet_columns);
      const std::size_t n = std::min(cache.size(), 10 * cols);
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i;
      const auto d = data::cache_to_dataset(cache);
      emit_sample_sheet(d.gather(idx), (n + cols - 1) / cols, cols, fs::path(m.out) / "cache_sheet.pgm");
    }
  });
}

void distill_cmd(const RunManifest& m, const diffusion::NoiseSchedule& sched, std::ostream& log) {
  auto teacher = load_model(m, "teacher");
  // Empty tap lists mean every block; taps do not change parameter shapes.
  if (teacher.spec.taps.empty()) teacher.spec = models::with_all_taps(teacher.spec);
  distill::StudentPlan plan{m.student.spec, m.student.init, num::derive_seed(m.seed, "student-init")};
  if (plan.spec.taps.empty()) plan.spec = models::with_all_taps(plan.spec);

  data::PairedDataset source;
  if (m.source.kind == "cache") {
    data::GenerationCache cache;
    try {
      cache = data::cache_read(m.inputs.at("cache").path);
    } catch (const Error& e) {
      throw ArtifactError("cache", e.what());
    }
    if (cache.teacher_digest != m.inputs.at("teacher").sha256) {
      throw ArtifactError("cache", "was generated by teacher " + cache.teacher_digest + ", not the supplied " +
                                       m.inputs.at("teacher").sha256);
    }
    source = data::cache_to_dataset(data::cache_prefix(cache, m.source.fraction));
  } else {
    const auto full = phase("load", [&] { return load_dataset(m.dataset); });
    const double per_condition = double(full.size()) / double(full.distinct_conditions().size());
    source = data::take_per_condition(
        full, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(m.source.fraction * per_condition))));
  }
  if (!m.source.exclude.empty()) {
    source = phase("load", [&] {
      return data::exclude_conditions(source, [&](const Condition& c) { return contains(m.source.exclude, c.class_id); })
          .kept;
    });
  }
  const data::ConditionPool pool{condition_universe(teacher.spec)};
  distill::DistillConfig cfg = m.distill;
  cfg.seed = num::derive_seed(m.seed, "distill");
  log << "distill from " << source.size() << " examples, " << source.distinct_conditions().size() << " of "
      << pool.size() << " conditions, policy " << cfg.policy.label() << "\n";

  std::string csv = "iteration,out,feat,total,running_total\n";
  const distill::Snapshot snap{std::max<std::size_t>(1, cfg.log_every), [&](const distill::Distiller& dz) {
                                 const auto& st = dz.state();
                                 log << "distill iteration " << st.iteration << " running loss " << st.running.total
                                     << "\n";
                               }};
  const auto result =
      phase("distill", [&] { return distill::run_distillation(teacher, plan, source, pool, cfg, sched, snap); });
  for (const auto& h : result.history) {
    csv += std::to_string(h.iteration) + "," + fmt(h.loss.out) + "," + fmt(h.loss.feat) + "," + fmt(h.loss.total) +
           "," + fmt(h.running.total) + "\n";
  }
  phase("write", [&] {
    save_checkpoint(result.student, {"student", cfg.iterations, manifest_digest(m)}, fs::path(m.out) / "student.ckpt");
    write_text(fs::path(m.out) / "history.csv", csv);
  });
}

void eval_cmd(const RunManifest& m, const diffusion::NoiseSchedule& sched, std::ostream& log) {
  const auto model = load_model(m, "model");
  const auto d = phase("load", [&] { return load_dataset(m.dataset); });
  const auto tc = obtain_classifier(m, d, log);
  const auto started = std::chrono::steady_clock::now();
  eval::EvalReport r;
  r.name = fs::path(m.out).filename().string();
  const auto conds = condition_universe(model.spec);
  num::Tensor images;
  r.fidelity = phase("sample", [&] {
    return eval::condition_fidelity(model, conds, m.eval.samples_per_condition, tc.classifier, m.sampler, sched,
                                    num::derive_seed(m.seed, "eval"), &images);
  });
  for (const auto& c : conds) {
    if (!contains(m.eval.unseen, c.class_id)) r.seen.insert(c);
  }
  r.split = eval::split_fidelity(r.fidelity, r.seen);
  if (m.eval.frechet && images.size() > 0) {
    r.frechet["dataset"] = phase("evaluate", [&] {
      const std::size_t n = std::min(images.dim(0), d.size());
      std::vector<std::size_t> idx(n);
      for (std::size_t i = 0; i < n; ++i) idx[i] = i * d.size() / n;
      return eval::feature_frechet(images, d.gather(idx), tc.classifier);
    });
  }
  r.digests["model"] = m.inputs.at("model").sha256;
  r.digests["classifier"] =
      m.inputs.contains("classifier") ? m.inputs.at("classifier").sha256 : file_digest(fs::path(m.out) / "classifier.rccl");
  r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  log << "eval seen " << r.split.seen << " unseen " << r.split.unseen << " overall " << r.split.overall << " in "
      << r.wall_clock_seconds << " s\n";
  phase("write", [&] {
    write_text(fs::path(m.out) / "report.json", eval::report_json(r).dump(2) + "\n");
    write_text(fs::path(m.out) / "report.csv", eval::report_csv(r));
  });
  phase("sample", [&] { write_sheet(model, m, sched, fs::path(m.out) / "samples.pgm"); });
}

void swap_cmd(const RunManifest& m, const diffusion::NoiseSchedule& sched, std::ostream& log) {
  const auto model = load_model(m, "model");
  const auto d = phase("load", [&] { return data::class_labels_only(load_dataset(m.dataset)); });
  const auto tc = obtain_classifier(m, d, log);
  const std::size_t classes = model.spec.class_count;
  if (classes < 2) throw ManifestError("teacher.spec.class_count", "swap-exp needs at least two classes");
  std::vector<eval::SwapPair> pairs;
  num::Rng rng(m.seed, "swap-pairs");
  for (std::size_t p = 0; p < m.swap.pairs; ++p) {
    const std::size_t row = rng.below(d.size());
    const Condition original = d.conditions[row];
    const auto target_class =
        static_cast<std::uint32_t>((original.class_id + 1 + rng.below(classes - 1)) % classes);
    const Condition target = model.spec.style_count == 0
                                 ? Condition::labeled(target_class)
                                 : Condition::composite(target_class, std::uint32_t(rng.below(model.spec.style_count)));
    pairs.push_back({{d.item(row).begin(), d.item(row).end()}, original, target});
  }
  const auto grid = m.swap.grid.empty() ? diffusion::step_grid(sched, m.sampler.steps) : m.swap.grid;
  const auto cells = phase("sample", [&] {
    return eval::swap_experiment(model, grid, pairs, tc.classifier, m.sampler, sched, num::derive_seed(m.seed, "swap"));
  });
  std::vector<double> follow;
  for (const auto& c : cells) follow.push_back(c.follows_condition);
  const auto smoothed = eval::smooth(follow, 3);
  std::string csv = "t,pairs,follows_original,follows_condition,other,follows_condition_smoothed\n";
  json rows = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    csv += std::to_string(c.t) + "," + std::to_string(c.pairs) + "," + fmt(c.follows_original) + "," +
           fmt(c.follows_condition) + "," + fmt(c.other) + "," + fmt(smoothed[i]) + "\n";
    rows.push_back({{"t", c.t},
                    {"pairs", c.pairs},
                    {"follows_original", c.follows_original},
                    {"follows_condition", c.follows_condition},
                    {"other", c.other},
                    {"follows_condition_smoothed", smoothed[i]}});
    log << "swap t " << c.t << " original " << c.follows_original << " condition " << c.follows_condition << "\n";
  }
  phase("write", [&] {
    write_text(fs::path(m.out) / "swap.csv", csv);
    write_text(fs::path(m.out) / "swap.json", json{{"model", m.inputs.at("model").sha256}, {"cells", rows}}.dump(2) + "\n");
  });
}

void overlap_cmd(const RunManifest& m, const diffusion::NoiseSchedule& sched, std::ostream& log) {
  if (m.dataset.kind != "toy2d") throw ManifestError("dataset.kind", "overlap needs a toy2d dataset");
  const auto spec = data::circle_toy2d(m.dataset.classes, m.dataset.radius, m.dataset.variance);
  if (m.overlap.c1 >= spec.condition_count()) throw ManifestError("overlap.c1", "outside the dataset's conditions");
  if (m.overlap.c2 >= spec.condition_count()) throw ManifestError("overlap.c2", "outside the dataset's conditions");
  const auto rows = phase("evaluate", [&] { return eval::overlap_curve(spec, m.overlap.c1, m.overlap.c2, sched); });
  std::string csv = "t,alpha_bar,symmetric_kl,w2\n";
  json j = json::array();
  for (const auto& r : rows) {
    csv += std::to_string(r.t) + "," + fmt(r.alpha_bar) + "," + fmt(r.symmetric_kl) + "," + fmt(r.w2) + "\n";
    j.push_back({{"t", r.t}, {"alpha_bar", r.alpha_bar}, {"symmetric_kl", r.symmetric_kl}, {"w2", r.w2}});
  }
  log << "overlap symmetric KL " << rows.front().symmetric_kl << " at t=0, " << rows.back().symmetric_kl << " at t="
      << rows.back().t << "\n";
  phase("write", [&] {
    write_text(fs::path(m.out) / "overlap.csv", csv);
    write_text(fs::path(m.out) / "overlap.json", j.dump(2) + "\n");
  });
}

void report_cmd(const RunManifest& m, std::ostream& log) {
  std::string csv = "run,seen,unseen,seen_plus_unseen,seen_conditions,unseen_conditions\n";
  std::string md = "| Run | Seen | Unseen | Seen+Unseen |\n|---|---|---|---|\n";
  json runs = json::array();
  for (const auto& [name, ref] : m.inputs) {
    eval::EvalReport r;
    try {
      r = eval::report_from_json(json::parse(util::read_text(ref.path)));
    } catch (const std::exception& e) {
      throw ArtifactError(name, e.what());
    }
    const auto& s = r.split;
    csv += name + "," + fmt(s.seen) + "," + fmt(s.unseen) + "," + fmt(s.overall) + "," +
           std::to_string(s.seen_conditions) + "," + std::to_string(s.unseen_conditions) + "\n";
    std::ostringstream row;
    row << std::fixed << std::setprecision(1) << "| " << name << " | " << 100 * s.seen << " | ";
    if (s.unseen_conditions > 0) {
      row << 100 * s.unseen;
    } else {
      row << "-";
    }
    row << " | " << 100 * s.overall << " |\n";
    md += row.str();
    runs.push_back({{"run", name},
                    {"seen", s.seen},
                    {"unseen", s.unseen},
                    {"seen_plus_unseen", s.overall},
                    {"seen_conditions", s.seen_conditions},
                    {"unseen_conditions", s.unseen_conditions},
                    {"report", ref.sha256}});
  }
  log << md;
  phase("write", [&] {
    write_text(fs::path(m.out) / "summary.csv", csv);
    write_text(fs::path(m.out) / "summary.md", md);
    write_text(fs::path(m.out) / "summary.json", json{{"runs", runs}}.dump(2) + "\n");
  });
}

}  // namespace

data::PairedDataset load_dataset(const DatasetSpec& spec) {
  data::PairedDataset d;
  if (spec.kind == "glyphs") {
    d = data::render_glyphs(spec.classes, spec.styles, spec.per_cell, spec.seed, {spec.image_size});
  } else if (spec.kind == "idx") {
    d = data::load_idx(spec.idx_images, spec.idx_labels);
  } else if (spec.kind == "toy2d") {
    d = data::gen_toy2d(data::circle_toy2d(spec.classes, spec.radius, spec.variance), spec.per_cell, spec.seed);
  } else {
    throw ManifestError("dataset.kind", "unknown kind \"" + spec.kind + "\"");
  }
  return spec.labels == "class" ? data::class_labels_only(std::move(d)) : d;
}

RunManifest resolve(RunManifest m, const Overrides& overrides) {
  if (overrides.seed) m.seed = *overrides.seed;
  if (overrides.out) m.out = *overrides.out;
  for (auto& [name, ref] : m.inputs) {
    if (!fs::is_regular_file(ref.path)) throw ArtifactError(name, "'" + ref.path + "' does not exist");
    const std::string digest = file_digest(ref.path);
    if (!ref.sha256.empty() && ref.sha256 != digest) {
      throw ArtifactError(name, "digest mismatch for '" + ref.path + "': manifest records " + ref.sha256 +
                                    ", file has " + digest);
    }
    ref.sha256 = digest;
  }
  return m;
}

void execute(const RunManifest& m, std::ostream& log) {
  const auto sched = build_schedule(m.schedule);
  phase("write", [&] {
    fs::create_directories(m.out);
    write_text(fs::path(m.out) / "manifest.json", manifest_text(m));
  });
  switch (m.command) {
    case Command::TrainTeacher:
      train_teacher_cmd(m, sched, log);
      break;
    case Command::GenCache:
      gen_cache_cmd(m, sched, log);
      break;
    case Command::Distill:
      distill_cmd(m, sched, log);
      break;
    case Command::Eval:
      eval_cmd(m, sched, log);
      break;
    case Command::SwapExp:
      swap_cmd(m, sched, log);
      break;
    case Command::Overlap:
      overlap_cmd(m, sched, log);
      break;
    case Command::Report:
      report_cmd(m, log);
      break;
  }
}

int run_command(std::string_view command, const std::filesystem::path& manifest, const Overrides& overrides,
                std::ostream& log, std::ostream& err) {
  try {
    const RunManifest m = resolve(load_manifest(manifest), overrides);
    if (command_name(m.command) != command) {
      throw ManifestError("command", "manifest is for '" + std::string(command_name(m.command)) + "', not '" +
                                         std::string(command) + "'");
    }
    execute(m, log);
    return kExitOk;
  } catch (const ManifestError& e) {
    err << "error: " << e.what() << "\n";
    return kExitManifest;
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const PhaseError& e) {
    err << "error: " << (e.numeric() ? "numeric failure " : "") << e.what() << "\n";
    return e.numeric() ? kExitNumeric : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace rclab::cli
