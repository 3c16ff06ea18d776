#include "rclab/distill/distill.hpp"

#include "rclab/num/param_io.hpp"
#include "rclab/util/binary_io.hpp"

namespace rclab::distill {

namespace {

constexpr char kStateMagic[] = "RCSTATE1";
constexpr int kStateVersion = 1;
constexpr double kRunningFactor = 0.98;

nlohmann::json loss_json(const LossBreakdown& l) { return {{"out", l.out}, {"feat", l.feat}, {"total", l.total}}; }

LossBreakdown loss_from(const nlohmann::json& j) {
  return {j.at("out").get<double>(), j.at("feat").get<double>(), j.at("total").get<double>()};
}

nlohmann::json opt_json(const num::AdamW& opt, std::vector<unsigned char>& payload) {
  return {{"steps", opt.step_count()},
          {"config", opt.config()},
          {"first", num::append_params(opt.first_moment(), payload)},
          {"second", num::append_params(opt.second_moment(), payload)}};
}

num::AdamW opt_from(const nlohmann::json& j, const num::ParamSet& params, std::span<const unsigned char> payload) {
  num::AdamW opt(params, j.at("config").get<num::AdamWConfig>());
  opt.restore(j.at("steps").get<std::uint64_t>(), num::parse_params(j.at("first"), payload),
              num::parse_params(j.at("second"), payload));
  return opt;
}

}  // namespace

void DistillConfig::validate() const {
  if (!(w_out >= 0.0) || !(w_feat >= 0.0)) throw ArgumentError("loss weights must be nonnegative");
  if (!(null_prob >= 0.0 && null_prob < 1.0)) throw ArgumentError("null probability must lie in [0, 1)");
  if (batch == 0) throw ArgumentError("distillation batch size must be positive");
  if (!(optimizer.lr > 0.0)) throw ArgumentError("learning rate must be positive");
  policy.validate();
}

void to_json(nlohmann::json& j, const DistillConfig& c) {
  j = nlohmann::json{{"w_out", c.w_out},
                     {"w_feat", c.w_feat},
                     {"null_prob", c.null_prob},
                     {"batch", c.batch},
                     {"iterations", c.iterations},
                     {"optimizer", c.optimizer},
                     {"policy", c.policy},
                     {"seed", c.seed},
                     {"use_feature_loss", c.use_feature_loss},
                     {"cosine_decay", c.cosine_decay},
                     {"log_every", c.log_every}};
}

void from_json(const nlohmann::json& j, DistillConfig& c) {
  c = DistillConfig{};
  c.w_out = j.value("w_out", c.w_out);
  c.w_feat = j.value("w_feat", c.w_feat);
  c.null_prob = j.value("null_prob", c.null_prob);
  c.batch = j.value("batch", c.batch);
  c.iterations = j.value("iterations", c.iterations);
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<num::AdamWConfig>();
  if (j.contains("policy")) c.policy = j.at("policy").get<RandomConditioningPolicy>();
  c.seed = j.value("seed", c.seed);
  c.use_feature_loss = j.value("use_feature_loss", c.use_feature_loss);
  c.cosine_decay = j.value("cosine_decay", c.cosine_decay);
  c.log_every = j.value("log_every", c.log_every);
}

template <class Real>
LossVars<Real> distill_loss(num::Tape<Real>& tape, const DenoiserSpec& teacher_spec,
                            const num::BasicParamSet<Real>& teacher, const DenoiserSpec& student_spec,
                            const num::BasicParamSet<Real>& student, std::span<const models::TapPair> pairs,
                            const num::BasicParamSet<Real>& heads, const num::BasicTensor<Real>& x_t,
                            std::span<const std::size_t> t, std::span<const Condition> c, const DistillConfig& config) {
  num::Tape<Real> frozen(false);
  const auto tout = models::denoise<Real>(frozen, teacher_spec, teacher, frozen.constant(x_t), t, c);
  const auto sout = models::denoise<Real>(tape, student_spec, student, tape.constant(x_t), t, c);

  LossVars<Real> v;
  v.out = tape.mse(sout.eps, tape.constant(frozen.value(tout.eps)));
  if (!config.use_feature_loss || pairs.empty()) {
    v.feat = tape.constant(num::BasicTensor<Real>(num::Shape{1}));
    v.total = tape.scale(v.out, static_cast<Real>(config.w_out));
    return v;
  }
  std::vector<Var> sf;
  sf.reserve(pairs.size());
  for (const auto& p : pairs) sf.push_back(sout.features.at(p.student));
  const auto projected = models::project_features<Real>(tape, student_spec.arch, heads, sf);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Var target = tape.constant(frozen.value(tout.features.at(pairs[i].teacher)));
    const Var term = tape.mse(projected[i], target);
    v.feat = i == 0 ? term : tape.add(v.feat, term);
  }
  v.total = tape.add(tape.scale(v.out, static_cast<Real>(config.w_out)),
                     tape.scale(v.feat, static_cast<Real>(config.w_feat)));
  return v;
}

template LossVars<float> distill_loss<float>(num::Tape<float>&, const DenoiserSpec&, const num::ParamSet&,
                                             const DenoiserSpec&, const num::ParamSet&,
                                             std::span<const models::TapPair>, const num::ParamSet&,
                                             const num::Tensor&, std::span<const std::size_t>,
                                             std::span<const Condition>, const DistillConfig&);
template LossVars<double> distill_loss<double>(num::Tape<double>&, const DenoiserSpec&, const num::ParamSet64&,
                                               const DenoiserSpec&, const num::ParamSet64&,
                                               std::span<const models::TapPair>, const num::ParamSet64&,
                                               const num::Tensor64&, std::span<const std::size_t>,
                                               std::span<const Condition>, const DistillConfig&);

void save_train_state(const TrainState& state, const std::filesystem::path& path) {
  std::vector<unsigned char> payload;
  nlohmann::json header{{"version", kStateVersion}, {"iteration", state.iteration}, {"running", loss_json(state.running)}};
  header["student"] = num::append_params(state.student, payload);
  header["heads"] = num::append_params(state.heads, payload);
  header["student_opt"] = opt_json(state.student_opt, payload);
  header["heads_opt"] = opt_json(state.heads_opt, payload);
  util::write_container(path, std::string_view(kStateMagic, 8), header.dump(), payload);
}

TrainState load_train_state(const std::filesystem::path& path) {
  const auto c = util::read_container(path, std::string_view(kStateMagic, 8));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(c.header);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("train state header is not valid JSON: " + std::string(e.what()));
  }
  if (header.value("version", -1) != kStateVersion) throw FormatError("unsupported train state version");
  TrainState s;
  s.iteration = header.at("iteration").get<std::uint64_t>();
  s.running = loss_from(header.at("running"));
  s.student = num::parse_params(header.at("student"), c.payload);
  s.heads = num::parse_params(header.at("heads"), c.payload);
  s.student_opt = opt_from(header.at("student_opt"), s.student, c.payload);
  s.heads_opt = opt_from(header.at("heads_opt"), s.heads, c.payload);
  return s;
}

Distiller::Distiller(const DenoiserModel& teacher, DenoiserModel student, data::PairedDataset source,
                     data::ConditionPool pool, DistillConfig config, const diffusion::NoiseSchedule& sched)
    : teacher_(teacher),
      student_spec_(student.spec),
      source_(std::move(source)),
      pool_(std::move(pool)),
      config_(std::move(config)),
      sched_(sched) {
  config_.validate();
  if (source_.empty()) throw EmptyDatasetError("distillation source is empty");
  if (source_.item_shape != teacher_.spec.input_shape || student_spec_.input_shape != teacher_.spec.input_shape) {
    throw ArgumentError("source items " + num::shape_string(source_.item_shape) + ", teacher input " +
                        num::shape_string(teacher_.spec.input_shape) + " and student input " +
                        num::shape_string(student_spec_.input_shape) + " must agree");
  }
  if (student_spec_.class_count != teacher_.spec.class_count || student_spec_.style_count != teacher_.spec.style_count) {
    throw ArgumentError("student and teacher must share the condition space");
  }
  layout_ = models::build_heads(teacher_.spec, student_spec_, num::derive_seed(config_.seed, "heads"));
  state_.student = std::move(student.params);
  state_.heads = layout_.params;
  state_.student_opt = num::AdamW(state_.student, config_.optimizer);
  state_.heads_opt = num::AdamW(state_.heads, config_.optimizer);
}

NoisedBatch Distiller::batch_for(std::uint64_t iteration) const {
  const BatchRecipe recipe{
      .batch = config_.batch, .null_prob = config_.null_prob, .policy = config_.policy, .pool = &pool_};
  return draw_batch(source_, sched_, recipe, config_.seed, "distill-example", iteration);
}

LossBreakdown Distiller::step() { return step(batch_for(state_.iteration)); }

LossBreakdown Distiller::step(const NoisedBatch& batch) {
  if (config_.cosine_decay) {
    const double lr = num::cosine_lr(config_.optimizer.lr, state_.iteration, config_.iterations);
    state_.student_opt.set_lr(lr);
    state_.heads_opt.set_lr(lr);
  }
  LossBreakdown l;
  try {
    num::Tape<float> tape;
    const auto v = distill_loss<float>(tape, teacher_.spec, teacher_.params, student_spec_, state_.student,
                                       layout_.pairs, state_.heads, batch.x_t, batch.t, batch.c, config_);
    tape.backward(v.total);
    l = {tape.value(v.out)[0], tape.value(v.feat)[0], tape.value(v.total)[0]};
    const num::ParamSet gs = tape.gradients(state_.student);
    const num::ParamSet gh = tape.gradients(state_.heads);
    state_.student_opt.step(state_.student, gs);
    state_.heads_opt.step(state_.heads, gh);
  } catch (const NumericError& e) {
    throw NumericError("distillation iteration " + std::to_string(state_.iteration) + ": " + e.what(), e.node(),
                       static_cast<long>(state_.iteration));
  }
  auto& r = state_.running;
  if (state_.iteration == 0) {
    r = l;
  } else {
    r.out = kRunningFactor * r.out + (1 - kRunningFactor) * l.out;
    r.feat = kRunningFactor * r.feat + (1 - kRunningFactor) * l.feat;
    r.total = kRunningFactor * r.total + (1 - kRunningFactor) * l.total;
  }
  ++state_.iteration;
  return l;
}

void Distiller::restore(TrainState state) {
  auto same_layout = [](const num::ParamSet& a, const num::ParamSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.entry(i).name != b.entry(i).name || a.entry(i).value.shape() != b.entry(i).value.shape()) return false;
    }
    return true;
  };
  if (!same_layout(state.student, state_.student) || !same_layout(state.heads, state_.heads)) {
    throw IncompatibleArchitectureError("train state does not match the distiller's student and heads");
  }
  state_ = std::move(state);
}

DenoiserModel make_student(const DenoiserModel& teacher, const StudentPlan& plan) {
  if (plan.init == StudentInit::Teacher) return models::init_student_from_teacher(teacher, plan.spec);
  return models::build_model(plan.spec, plan.init_seed);
}

DistillResult run_distillation(const DenoiserModel& teacher, const StudentPlan& plan,
                               const data::PairedDataset& source, const data::ConditionPool& pool,
                               const DistillConfig& config, const diffusion::NoiseSchedule& sched,
                               const Snapshot& snapshot) {
  Distiller d(teacher, make_student(teacher, plan), source, pool, config, sched);
  DistillResult result;
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const LossBreakdown l = d.step();
    const bool last = it == config.iterations;
    if (last || (config.log_every > 0 && it % config.log_every == 0)) {
      result.history.push_back({it, l, d.state().running});
    }
    if (snapshot.fn && (last || (snapshot.every > 0 && it % snapshot.every == 0))) snapshot.fn(d);
  }
  result.student = d.student();
  return result;
}

DistillResult run_distillation(const DenoiserModel& teacher, const StudentPlan& plan,
                               const data::GenerationCache& source, const data::ConditionPool& pool,
                               const DistillConfig& config, const diffusion::NoiseSchedule& sched,
                               const Snapshot& snapshot) {
  if (source.item_shape != teacher.spec.input_shape) {
    throw ArgumentError("cache items " + num::shape_string(source.item_shape) + " do not fit model input " +
                        num::shape_string(teacher.spec.input_shape));
  }
  return run_distillation(teacher, plan, data::cache_to_dataset(source), pool, config, sched, snapshot);
}

}  // namespace rclab::distill
