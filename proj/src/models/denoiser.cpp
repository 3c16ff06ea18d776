#include "rclab/models/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rclab/num/rng.hpp"

namespace rclab::models {

namespace {

std::string block(std::size_t i, std::string_view leaf) { return "block" + std::to_string(i) + "." + std::string(leaf); }

std::size_t emb_width(const DenoiserSpec& s) { return s.time_width + s.cond_width; }

Tensor normal_init(Shape shape, double stddev, num::Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.normal() * stddev);
  return t;
}

void add_dense(num::ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, num::Rng& rng,
               bool zero = false) {
  ps.add(prefix + ".w", zero ? Tensor(Shape{in, out}) : normal_init({in, out}, 1.0 / std::sqrt(double(in)), rng));
  ps.add(prefix + ".b", Tensor(Shape{out}));
}

void add_conv(num::ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, num::Rng& rng,
              bool zero = false) {
  const double fan_in = double(in) * 9.0;
  ps.add(prefix + ".w", zero ? Tensor(Shape{out, in, 3, 3}) : normal_init({out, in, 3, 3}, 1.0 / std::sqrt(fan_in), rng));
  ps.add(prefix + ".b", Tensor(Shape{out}));
}

void add_norm(num::ParamSet& ps, const std::string& prefix, std::size_t width) {
  ps.add(prefix + ".g", Tensor(Shape{width}, 1.0f));
  ps.add(prefix + ".b", Tensor(Shape{width}));
}

template <class Real>
Var norm(num::Tape<Real>& t, const num::BasicParamSet<Real>& p, const std::string& prefix, Var x, std::size_t groups) {
  return t.group_norm(x, t.param(p, prefix + ".g"), t.param(p, prefix + ".b"), groups);
}

template <class Real>
Var dense(num::Tape<Real>& t, const num::BasicParamSet<Real>& p, const std::string& prefix, Var x) {
  return t.dense(x, t.param(p, prefix + ".w"), t.param(p, prefix + ".b"));
}

template <class Real>
Var conv(num::Tape<Real>& t, const num::BasicParamSet<Real>& p, const std::string& prefix, Var x) {
  return t.conv2d(x, t.param(p, prefix + ".w"), t.param(p, prefix + ".b"));
}

}  // namespace

void DenoiserSpec::validate() const {
  if (width == 0 || depth == 0) throw ArgumentError("denoiser width and depth must be positive");
  if (input_shape.empty() || num::shape_size(input_shape) == 0) throw ArgumentError("denoiser input shape is empty");
  if (arch == Arch::Conv && input_shape.size() != 3) throw ArgumentError("conv denoiser needs a [C,H,W] input shape");
  if (time_width == 0 || time_width % 2 != 0) throw ArgumentError("time embedding width must be positive and even");
  if (cond_width == 0) throw ArgumentError("condition embedding width must be positive");
  if (class_count == 0) throw ArgumentError("class count must be positive");
  if (groups == 0 || width % groups != 0) {
    throw ArgumentError("width " + std::to_string(width) + " is not divisible into " + std::to_string(groups) + " groups");
  }
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (taps[i] >= depth) throw ArgumentError("tap point " + std::to_string(taps[i]) + " beyond depth");
    if (i > 0 && taps[i] <= taps[i - 1]) throw ArgumentError("tap points must be strictly increasing");
  }
}

DenoiserSpec with_all_taps(DenoiserSpec spec) {
  spec.taps.resize(spec.depth);
  for (std::size_t i = 0; i < spec.depth; ++i) spec.taps[i] = i;
  return spec;
}

void to_json(nlohmann::json& j, const DenoiserSpec& s) {
  j = nlohmann::json{{"arch", s.arch == Arch::Mlp ? "mlp" : "conv"},
                     {"input_shape", s.input_shape},
                     {"width", s.width},
                     {"depth", s.depth},
                     {"cond_width", s.cond_width},
                     {"time_width", s.time_width},
                     {"class_count", s.class_count},
                     {"style_count", s.style_count},
                     {"groups", s.groups},
                     {"taps", s.taps}};
}

void from_json(const nlohmann::json& j, DenoiserSpec& s) {
  const std::string arch = j.at("arch").get<std::string>();
  if (arch != "mlp" && arch != "conv") throw ArgumentError("unknown architecture '" + arch + "'");
  s.arch = arch == "mlp" ? Arch::Mlp : Arch::Conv;
  s.input_shape = j.at("input_shape").get<Shape>();
  s.width = j.at("width").get<std::size_t>();
  s.depth = j.at("depth").get<std::size_t>();
  s.cond_width = j.at("cond_width").get<std::size_t>();
  s.time_width = j.at("time_width").get<std::size_t>();
  s.class_count = j.at("class_count").get<std::size_t>();
  s.style_count = j.value("style_count", std::size_t{0});
  s.groups = j.value("groups", std::size_t{8});
  s.taps = j.value("taps", std::vector<std::size_t>{});
  s.validate();
}

void to_json(nlohmann::json& j, const Condition& c) {
  switch (c.kind) {
    case Condition::Kind::Null:
      j = nlohmann::json::array();
      break;
    case Condition::Kind::Labeled:
      j = nlohmann::json::array({c.class_id});
      break;
    case Condition::Kind::Composite:
      j = nlohmann::json::array({c.class_id, c.style_id});
      break;
  }
}

void from_json(const nlohmann::json& j, Condition& c) {
  if (!j.is_array() || j.size() > 2) throw ArgumentError("condition must be [], [class] or [class, style]");
  if (j.empty()) {
    c = Condition::null();
  } else if (j.size() == 1) {
    c = Condition::labeled(j[0].get<std::uint32_t>());
  } else {
    c = Condition::composite(j[0].get<std::uint32_t>(), j[1].get<std::uint32_t>());
  }
}

std::size_t class_row(const DenoiserSpec& spec, const Condition& c) {
  if (c.is_null()) return spec.class_count;
  if (c.class_id >= spec.class_count) {
    throw ArgumentError("condition class " + std::to_string(c.class_id) + " outside " + std::to_string(spec.class_count));
  }
  return c.class_id;
}

// Style table rows: [0, S) styles, S = no style (labeled), S+1 = null.
std::size_t style_row(const DenoiserSpec& spec, const Condition& c) {
  switch (c.kind) {
    case Condition::Kind::Null:
      return spec.style_count + 1;
    case Condition::Kind::Labeled:
      return spec.style_count;
    case Condition::Kind::Composite:
      if (c.style_id >= spec.style_count) {
        throw ArgumentError("condition style " + std::to_string(c.style_id) + " outside " +
                            std::to_string(spec.style_count));
      }
      return c.style_id;
  }
  return spec.style_count;
}

DenoiserModel build_model(const DenoiserSpec& spec, std::uint64_t init_seed) {
  spec.validate();
  num::Rng rng(init_seed, "denoiser-init");
  num::ParamSet ps;
  ps.add("emb.class", normal_init({spec.class_count + 1, spec.cond_width}, 1.0, rng));
  ps.add("emb.style", normal_init({spec.style_count + 2, spec.cond_width}, 1.0, rng));
  const std::size_t w = spec.width;
  if (spec.arch == Arch::Mlp) {
    add_dense(ps, "in", spec.input_size() + emb_width(spec), w, rng);
  } else {
    add_conv(ps, "in", spec.input_shape[0], w, rng);
  }
  for (std::size_t i = 0; i < spec.depth; ++i) {
    if (spec.arch == Arch::Mlp) {
      add_norm(ps, block(i, "norm"), w);
      add_dense(ps, block(i, "fc1"), w, w, rng);
      add_dense(ps, block(i, "emb"), emb_width(spec), w, rng);
      add_dense(ps, block(i, "fc2"), w, w, rng, true);
    } else {
      add_norm(ps, block(i, "norm1"), w);
      add_conv(ps, block(i, "conv1"), w, w, rng);
      add_dense(ps, block(i, "emb"), emb_width(spec), w, rng);
      add_norm(ps, block(i, "norm2"), w);
      add_conv(ps, block(i, "conv2"), w, w, rng, true);
    }
  }
  add_norm(ps, "out.norm", w);
  if (spec.arch == Arch::Mlp) {
    add_dense(ps, "out", w, spec.input_size(), rng, true);
  } else {
    add_conv(ps, "out", w, spec.input_shape[0], rng, true);
  }
  return {spec, std::move(ps)};
}

template <class Real>
num::BasicTensor<Real> timestep_embedding(std::span<const std::size_t> timesteps, std::size_t width) {
  const std::size_t half = width / 2;
  num::BasicTensor<Real> out(Shape{timesteps.size(), width});
  for (std::size_t b = 0; b < timesteps.size(); ++b) {
    for (std::size_t j = 0; j < half; ++j) {
      const double freq = std::exp(-std::log(10000.0) * double(j) / double(half));
      const double arg = double(timesteps[b]) * freq;
      out[b * width + j] = static_cast<Real>(std::sin(arg));
      out[b * width + half + j] = static_cast<Real>(std::cos(arg));
    }
  }
  return out;
}

template <class Real>
DenoiserOutput<Real> denoise(num::Tape<Real>& t, const DenoiserSpec& spec, const num::BasicParamSet<Real>& p, Var x,
                             std::span<const std::size_t> timesteps, std::span<const Condition> conds) {
  const Shape xs = t.value(x).shape();
  const std::size_t batch = xs.at(0);
  if (timesteps.size() != batch || conds.size() != batch) {
    throw ShapeError("denoise: batch of " + std::to_string(batch) + " with " + std::to_string(timesteps.size()) +
                     " timesteps and " + std::to_string(conds.size()) + " conditions");
  }
  Shape expected{batch};
  expected.insert(expected.end(), spec.input_shape.begin(), spec.input_shape.end());
  if (xs != expected) {
    throw ShapeError("denoise: input " + num::shape_string(xs) + ", expected " + num::shape_string(expected));
  }
  std::vector<std::size_t> crow(batch), srow(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    crow[b] = class_row(spec, conds[b]);
    srow[b] = style_row(spec, conds[b]);
  }
  const Var temb = t.constant(timestep_embedding<Real>(timesteps, spec.time_width));
  const Var cemb = t.add(t.embedding(t.param(p, "emb.class"), crow), t.embedding(t.param(p, "emb.style"), srow));
  const Var joint = t.concat(temb, cemb);
  const Var e = t.silu(joint);

  DenoiserOutput<Real> out;
  Var h;
  if (spec.arch == Arch::Mlp) {
    const Var flat = t.reshape(x, {batch, spec.input_size()});
    h = dense(t, p, "in", t.concat(flat, joint));
    for (std::size_t i = 0; i < spec.depth; ++i) {
      Var u = dense(t, p, block(i, "fc1"), t.silu(norm(t, p, block(i, "norm"), h, spec.groups)));
      u = t.add(u, dense(t, p, block(i, "emb"), e));
      u = dense(t, p, block(i, "fc2"), t.silu(u));
      h = t.add(h, u);
      if (std::find(spec.taps.begin(), spec.taps.end(), i) != spec.taps.end()) out.features.push_back(h);
    }
    const Var y = dense(t, p, "out", t.silu(norm(t, p, "out.norm", h, spec.groups)));
    out.eps = t.reshape(y, xs);
  } else {
    h = conv(t, p, "in", x);
    for (std::size_t i = 0; i < spec.depth; ++i) {
      Var u = conv(t, p, block(i, "conv1"), t.silu(norm(t, p, block(i, "norm1"), h, spec.groups)));
      u = t.add_channel(u, dense(t, p, block(i, "emb"), e));
      u = conv(t, p, block(i, "conv2"), t.silu(norm(t, p, block(i, "norm2"), u, spec.groups)));
      h = t.add(h, u);
      if (std::find(spec.taps.begin(), spec.taps.end(), i) != spec.taps.end()) out.features.push_back(h);
    }
    out.eps = conv(t, p, "out", t.silu(norm(t, p, "out.norm", h, spec.groups)));
  }
  return out;
}

Tensor predict_eps(const DenoiserModel& model, const Tensor& x, std::span<const std::size_t> timesteps,
                   std::span<const Condition> conds) {
  num::Tape<float> tape(false);
  const auto out = denoise<float>(tape, model.spec, model.params, tape.constant(x), timesteps, conds);
  return tape.value(out.eps);
}

std::vector<std::size_t> retained_blocks(std::size_t teacher_depth, std::size_t student_depth) {
  if (student_depth == 0 || student_depth > teacher_depth) {
    throw IncompatibleArchitectureError("student depth " + std::to_string(student_depth) +
                                        " cannot be pruned from teacher depth " + std::to_string(teacher_depth));
  }
  std::vector<std::size_t> out(student_depth);
  for (std::size_t i = 0; i < student_depth; ++i) out[i] = i * teacher_depth / student_depth;
  return out;
}

DenoiserModel init_student_from_teacher(const DenoiserModel& teacher, const DenoiserSpec& student_spec) {
  student_spec.validate();
  const DenoiserSpec& ts = teacher.spec;
  const bool compatible = ts.arch == student_spec.arch && ts.input_shape == student_spec.input_shape &&
                          ts.width == student_spec.width && ts.cond_width == student_spec.cond_width &&
                          ts.time_width == student_spec.time_width && ts.class_count == student_spec.class_count &&
                          ts.style_count == student_spec.style_count && ts.groups == student_spec.groups &&
                          student_spec.depth <= ts.depth;
  if (!compatible) {
    throw IncompatibleArchitectureError(
        "teacher initialization needs a depth-pruned student with identical widths; channel-compressed students "
        "must be randomly initialized");
  }
  const auto keep = retained_blocks(ts.depth, student_spec.depth);
  DenoiserModel student = build_model(student_spec, 0);
  for (const auto& entry : student.params.entries()) {
    std::string source = entry.name;
    if (source.rfind("block", 0) == 0) {
      const std::size_t dot = source.find('.');
      const std::size_t idx = std::stoul(source.substr(5, dot - 5));
      source = block(keep[idx], source.substr(dot + 1));
    }
    student.params.assign(entry.name, teacher.params.get(source));
  }
  return student;
}

template num::BasicTensor<float> timestep_embedding<float>(std::span<const std::size_t>, std::size_t);
template num::BasicTensor<double> timestep_embedding<double>(std::span<const std::size_t>, std::size_t);
template DenoiserOutput<float> denoise<float>(num::Tape<float>&, const DenoiserSpec&, const num::ParamSet&, Var,
                                              std::span<const std::size_t>, std::span<const Condition>);
template DenoiserOutput<double> denoise<double>(num::Tape<double>&, const DenoiserSpec&, const num::ParamSet64&, Var,
                                                std::span<const std::size_t>, std::span<const Condition>);

}  // namespace rclab::models
