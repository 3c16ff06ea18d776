#include "rclab/cli/manifest.hpp"

#include <array>
#include <utility>

#include "rclab/util/binary_io.hpp"
#include "rclab/util/digest.hpp"

namespace rclab::cli {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Command, const char*>, 7> kCommands{{{Command::TrainTeacher, "train-teacher"},
                                                                    {Command::GenCache, "gen-cache"},
                                                                    {Command::Distill, "distill"},
                                                                    {Command::Eval, "eval"},
                                                                    {Command::SwapExp, "swap-exp"},
                                                                    {Command::Overlap, "overlap"},
                                                                    {Command::Report, "report"}}};

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const char* type_name(const json& v) {
  if (v.is_number_unsigned()) return "a non-negative integer";
  if (v.is_number()) return "a number";
  if (v.is_boolean()) return "a boolean";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "null";
}

bool fits(const json& ref, const json& v) {
  if (ref.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (ref.is_number()) return v.is_number();
  if (ref.is_boolean()) return v.is_boolean();
  if (ref.is_string()) return v.is_string();
  if (ref.is_array()) return v.is_array();
  if (ref.is_object()) return v.is_object();
  // Optional numeric fields default to null.
  return v.is_null() || v.is_number();
}

// Array element type when the default array is empty.
json element_ref(const std::string& path) {
  if (path == "sampler.clip") return json(nullptr);
  return json(std::size_t{0});
}

void check_fields(const json& ref, const json& v, const std::string& path) {
  if (!fits(ref, v)) throw ManifestError(path, std::string("expected ") + type_name(ref) + ", got " + v.dump());
  if (v.is_object()) {
    for (const auto& [key, item] : v.items()) {
      if (!ref.contains(key)) throw ManifestError(join(path, key), "unknown field");
      check_fields(ref.at(key), item, join(path, key));
    }
  } else if (v.is_array()) {
    const json elem = ref.empty() ? element_ref(path) : ref.front();
    for (std::size_t i = 0; i < v.size(); ++i) check_fields(elem, v[i], path + "[" + std::to_string(i) + "]");
  }
}

void check_inputs(const json& v) {
  if (!v.is_object()) throw ManifestError("inputs", "expected an object of artifact references");
  for (const auto& [name, ref] : v.items()) {
    const std::string path = "inputs." + name;
    if (!ref.is_object()) throw ManifestError(path, "expected {\"path\": ..., \"sha256\": ...}");
    for (const auto& [key, item] : ref.items()) {
      if (key != "path" && key != "sha256") throw ManifestError(path + "." + key, "unknown field");
      if (!item.is_string()) throw ManifestError(path + "." + key, "expected a string");
    }
    if (!ref.contains("path")) throw ManifestError(path + ".path", "missing");
  }
}

json without_seed(json j) {
  j.erase("seed");
  return j;
}

json schema() {
  json s = manifest_json(RunManifest{});
  // Every policy parameter is accepted regardless of the default kind.
  s["distill"]["policy"] = {{"kind", "off"}, {"lambda", 5.0}, {"slope", 20.0}, {"center", 0.7}, {"p", 0.5}};
  s.erase("inputs");
  return s;
}

template <class T, class F>
T section(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ManifestError&) {
    throw;
  } catch (const json::exception& e) {
    throw ManifestError(path, e.what());
  } catch (const Error& e) {
    throw ManifestError(path, e.what());
  }
}

template <class T>
T get_at(const json& j, const std::string& path) {
  return section<T>(path, [&] { return j.get<T>(); });
}

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ManifestError(path, message);
}

const char* init_name(distill::StudentInit i) { return i == distill::StudentInit::Teacher ? "teacher" : "random"; }

}  // namespace

const char* command_name(Command c) {
  for (const auto& [k, name] : kCommands) {
    if (k == c) return name;
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) {
  for (const auto& [k, n] : kCommands) {
    if (name == n) return k;
  }
  return std::nullopt;
}

json manifest_json(const RunManifest& m) {
  json inputs = json::object();
  for (const auto& [name, ref] : m.inputs) inputs[name] = {{"path", ref.path}, {"sha256", ref.sha256}};
  const auto& d = m.dataset;
  return json{
      {"command", command_name(m.command)},
      {"seed", m.seed},
      {"out", m.out},
      {"dataset",
       {{"kind", d.kind},
        {"classes", d.classes},
        {"styles", d.styles},
        {"per_cell", d.per_cell},
        {"image_size", d.image_size},
        {"labels", d.labels},
        {"seed", d.seed},
        {"idx_images", d.idx_images},
        {"idx_labels", d.idx_labels},
        {"radius", d.radius},
        {"variance", d.variance}}},
      {"schedule", {{"steps", m.schedule.steps}, {"beta_start", m.schedule.beta_start}, {"beta_end", m.schedule.beta_end}}},
      {"teacher", {{"spec", m.teacher}, {"training", without_seed(m.teacher_training)}}},
      {"student", {{"spec", m.student.spec}, {"init", init_name(m.student.init)}}},
      {"distill", without_seed(m.distill)},
      {"source", {{"kind", m.source.kind}, {"fraction", m.source.fraction}, {"exclude", m.source.exclude}}},
      {"cache", {{"per_condition", m.cache.per_condition}, {"exclude", m.cache.exclude}}},
      {"sampler", m.sampler},
      {"eval",
       {{"samples_per_condition", m.eval.samples_per_condition},
        {"unseen", m.eval.unseen},
        {"frechet", m.eval.frechet},
        {"sheet_columns", m.eval.sheet_columns}}},
      {"classifier", without_seed(m.classifier)},
      {"swap", {{"pairs", m.swap.pairs}, {"grid", m.swap.grid}}},
      {"overlap", {{"c1", m.overlap.c1}, {"c2", m.overlap.c2}}},
      {"inputs", std::move(inputs)}};
}

RunManifest parse_manifest(const json& j) {
  if (!j.is_object()) throw ManifestError("", "manifest must be a JSON object");
  require(j.contains("command"), "command", "missing");
  json user = j;
  json inputs = json::object();
  if (user.contains("inputs")) {
    check_inputs(user["inputs"]);
    inputs = user["inputs"];
    user.erase("inputs");
  }
  check_fields(schema(), user, "");

  json v = manifest_json(RunManifest{});
  v.erase("inputs");
  v.merge_patch(user);

  RunManifest m;
  const auto cmd = parse_command(v["command"].get<std::string>());
  require(cmd.has_value(), "command", "unknown command " + v["command"].dump());
  m.command = *cmd;
  m.seed = v["seed"].get<std::uint64_t>();
  m.out = v["out"].get<std::string>();
  require(!m.out.empty(), "out", "must not be empty");

  const json& d = v["dataset"];
  m.dataset.kind = d["kind"].get<std::string>();
  require(m.dataset.kind == "glyphs" || m.dataset.kind == "idx" || m.dataset.kind == "toy2d", "dataset.kind",
          "expected \"glyphs\", \"idx\" or \"toy2d\", got \"" + m.dataset.kind + "\"");
  m.dataset.classes = d["classes"].get<std::size_t>();
  m.dataset.styles = d["styles"].get<std::size_t>();
  m.dataset.per_cell = d["per_cell"].get<std::size_t>();
  m.dataset.image_size = d["image_size"].get<std::size_t>();
  m.dataset.labels = d["labels"].get<std::string>();
  m.dataset.seed = d["seed"].get<std::uint64_t>();
  m.dataset.idx_images = d["idx_images"].get<std::string>();
  m.dataset.idx_labels = d["idx_labels"].get<std::string>();
  m.dataset.radius = d["radius"].get<double>();
  m.dataset.variance = d["variance"].get<double>();
  require(m.dataset.labels == "class" || m.dataset.labels == "composite", "dataset.labels",
          "expected \"class\" or \"composite\"");
  require(m.dataset.classes >= 1, "dataset.classes", "must be at least 1");
  if (m.dataset.kind == "glyphs") {
    require(m.dataset.classes <= 10, "dataset.classes", "glyphs support at most 10 classes");
    require(m.dataset.styles >= 1, "dataset.styles", "must be at least 1");
    require(m.dataset.image_size >= 8, "dataset.image_size", "must be at least 8");
  }
  require(m.dataset.per_cell >= 1, "dataset.per_cell", "must be at least 1");
  if (m.dataset.kind == "idx") {
    require(!m.dataset.idx_images.empty(), "dataset.idx_images", "required for idx datasets");
    require(!m.dataset.idx_labels.empty(), "dataset.idx_labels", "required for idx datasets");
  }
  require(m.dataset.radius > 0.0, "dataset.radius", "must be positive");
  require(m.dataset.variance > 0.0, "dataset.variance", "must be positive");

  const json& s = v["schedule"];
  m.schedule = {s["steps"].get<std::size_t>(), s["beta_start"].get<double>(), s["beta_end"].get<double>()};
  section<int>("schedule", [&] {
    build_schedule(m.schedule);
    return 0;
  });
  const auto sched = build_schedule(m.schedule);

  m.teacher = get_at<models::DenoiserSpec>(v["teacher"]["spec"], "teacher.spec");
  m.teacher_training = get_at<distill::TeacherConfig>(v["teacher"]["training"], "teacher.training");
  section<int>("teacher.training", [&] {
    m.teacher_training.validate();
    return 0;
  });

  m.student.spec = get_at<models::DenoiserSpec>(v["student"]["spec"], "student.spec");
  const std::string init = v["student"]["init"].get<std::string>();
  require(init == "random" || init == "teacher", "student.init", "expected \"random\" or \"teacher\"");
  m.student.init = init == "teacher" ? distill::StudentInit::Teacher : distill::StudentInit::Random;

  m.distill.policy = get_at<distill::RandomConditioningPolicy>(v["distill"]["policy"], "distill.policy");
  m.distill = get_at<distill::DistillConfig>(v["distill"], "distill");
  section<int>("distill", [&] {
    m.distill.validate();
    return 0;
  });

  const json& src = v["source"];
  m.source.kind = src["kind"].get<std::string>();
  require(m.source.kind == "cache" || m.source.kind == "dataset", "source.kind", "expected \"cache\" or \"dataset\"");
  m.source.fraction = src["fraction"].get<double>();
  require(m.source.fraction > 0.0 && m.source.fraction <= 1.0, "source.fraction", "must lie in (0, 1]");
  m.source.exclude = src["exclude"].get<std::vector<std::uint32_t>>();

  m.cache.per_condition = v["cache"]["per_condition"].get<std::size_t>();
  m.cache.exclude = v["cache"]["exclude"].get<std::vector<std::uint32_t>>();

  m.sampler = get_at<diffusion::SamplerConfig>(v["sampler"], "sampler");
  section<int>("sampler", [&] {
    m.sampler.validate(sched);
    return 0;
  });

  const json& e = v["eval"];
  m.eval.samples_per_condition = e["samples_per_condition"].get<std::size_t>();
  m.eval.unseen = e["unseen"].get<std::vector<std::uint32_t>>();
  m.eval.frechet = e["frechet"].get<bool>();
  m.eval.sheet_columns = e["sheet_columns"].get<std::size_t>();

  m.classifier = get_at<eval::ClassifierConfig>(v["classifier"], "classifier");
  require(m.classifier.iterations >= 1, "classifier.iterations", "must be at least 1");
  require(m.classifier.holdout_fraction >= 0.0 && m.classifier.holdout_fraction < 1.0, "classifier.holdout_fraction",
          "must lie in [0, 1)");

  m.swap.pairs = v["swap"]["pairs"].get<std::size_t>();
  m.swap.grid = v["swap"]["grid"].get<std::vector<std::size_t>>();
  for (std::size_t i = 0; i < m.swap.grid.size(); ++i) {
    require(m.swap.grid[i] < m.schedule.steps, "swap.grid[" + std::to_string(i) + "]", "must be below schedule.steps");
  }
  m.overlap.c1 = v["overlap"]["c1"].get<std::size_t>();
  m.overlap.c2 = v["overlap"]["c2"].get<std::size_t>();

  for (const auto& [name, ref] : inputs.items()) {
    m.inputs[name] = {ref["path"].get<std::string>(), ref.value("sha256", std::string{})};
  }
  for (const auto& name : required_inputs(m.command)) {
    if (name == "cache" && m.source.kind != "cache") continue;
    require(m.inputs.contains(name), "inputs." + name, std::string("required by ") + command_name(m.command));
  }
  if (m.command == Command::Report) require(!m.inputs.empty(), "inputs", "report needs at least one eval report");
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(util::read_text(path));
  } catch (const json::parse_error& e) {
    throw ManifestError("", "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_manifest(j);
}

std::string manifest_text(const RunManifest& m) { return manifest_json(m).dump(2) + "\n"; }

std::string manifest_digest(const RunManifest& m) {
  json j = manifest_json(m);
  j.erase("out");
  for (auto& [name, ref] : j["inputs"].items()) ref.erase("path");
  return util::sha256_hex(j.dump());
}

std::vector<std::string> required_inputs(Command c) {
  switch (c) {
    case Command::GenCache:
      return {"teacher"};
    case Command::Distill:
      return {"teacher", "cache"};
    case Command::Eval:
    case Command::SwapExp:
      return {"model"};
    default:
      return {};
  }
}

diffusion::NoiseSchedule build_schedule(const ScheduleSpec& s) {
  return diffusion::build_schedule(s.steps, s.beta_start, s.beta_end);
}

}  // namespace rclab::cli
