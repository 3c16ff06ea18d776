#include "rclab/distill/teacher.hpp"

#include "rclab/distill/batch.hpp"
#include "rclab/num/rng.hpp"

namespace rclab::num {

void to_json(nlohmann::json& j, const AdamWConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"weight_decay", c.weight_decay}};
}

void from_json(const nlohmann::json& j, AdamWConfig& c) {
  c = AdamWConfig{};
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
}

}  // namespace rclab::num

namespace rclab::distill {

void TeacherConfig::validate() const {
  if (batch == 0) throw ArgumentError("teacher batch size must be positive");
  if (!(null_prob >= 0.0 && null_prob < 1.0)) throw ArgumentError("null probability must lie in [0, 1)");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ArgumentError("ema decay must lie in [0, 1)");
  if (!(optimizer.lr > 0.0)) throw ArgumentError("learning rate must be positive");
}

void to_json(nlohmann::json& j, const TeacherConfig& c) {
  j = nlohmann::json{{"iterations", c.iterations}, {"batch", c.batch},         {"optimizer", c.optimizer},
                     {"null_prob", c.null_prob},   {"ema_decay", c.ema_decay}, {"seed", c.seed},
                     {"cosine_decay", c.cosine_decay}};
}

void from_json(const nlohmann::json& j, TeacherConfig& c) {
  c = TeacherConfig{};
  c.iterations = j.value("iterations", c.iterations);
  c.batch = j.value("batch", c.batch);
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<num::AdamWConfig>();
  c.null_prob = j.value("null_prob", c.null_prob);
  c.ema_decay = j.value("ema_decay", c.ema_decay);
  c.seed = j.value("seed", c.seed);
  c.cosine_decay = j.value("cosine_decay", c.cosine_decay);
}

DenoiserModel train_teacher(const data::PairedDataset& dataset, const DenoiserSpec& spec, const TeacherConfig& config,
                            const diffusion::NoiseSchedule& sched, const Progress& progress) {
  config.validate();
  if (dataset.empty()) throw EmptyDatasetError("teacher training needs a non-empty dataset");
  if (dataset.item_shape != spec.input_shape) {
    throw ArgumentError("dataset items " + num::shape_string(dataset.item_shape) + " do not match model input " +
                        num::shape_string(spec.input_shape));
  }
  DenoiserModel model = models::build_model(spec, num::derive_seed(config.seed, "teacher-init"));
  num::ParamSet ema = model.params;
  num::AdamW opt(model.params, config.optimizer);
  const BatchRecipe recipe{.batch = config.batch, .null_prob = config.null_prob};
  const float d = static_cast<float>(config.ema_decay);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const NoisedBatch b = draw_batch(dataset, sched, recipe, config.seed, "teacher-example", it);
    if (config.cosine_decay) opt.set_lr(num::cosine_lr(config.optimizer.lr, it, config.iterations));
    double loss = 0.0;
    try {
      num::Tape<float> tape;
      const auto out = models::denoise<float>(tape, spec, model.params, tape.constant(b.x_t), b.t, b.c);
      const num::Var l = tape.mse(out.eps, tape.constant(b.eps));
      tape.backward(l);
      loss = tape.value(l)[0];
      opt.step(model.params, tape.gradients(model.params));
    } catch (const NumericError& e) {
      throw TrainingDivergedError(e, it, config.ema_decay > 0.0 ? DenoiserModel{spec, ema} : model);
    }
    if (config.ema_decay > 0.0) {
      for (std::size_t i = 0; i < ema.size(); ++i) {
        auto dst = ema.values(i);
        const auto src = model.params.values(i);
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = d * dst[k] + (1.0f - d) * src[k];
      }
    }
    if (progress.fn && progress.every > 0 && (it + 1) % progress.every == 0) progress.fn(it + 1, loss);
  }
  if (config.ema_decay > 0.0) model.params = std::move(ema);
  return model;
}

}  // namespace rclab::distill
