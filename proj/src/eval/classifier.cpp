#include "rclab/eval/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "rclab/errors.hpp"
#include "rclab/num/rng.hpp"
#include "rclab/num/tape.hpp"

namespace rclab::eval {

namespace {

struct Forward {
  num::Var features;
  num::Var logits;
};

Forward forward(num::Tape<float>& t, const FidelityClassifier& c, const Tensor& images) {
  const std::size_t n = images.dim(0);
  const std::size_t d = num::shape_size(c.input_shape);
  if (images.size() != n * d) {
    throw ShapeError("classifier input " + num::shape_string(images.shape()) + " does not match " +
                     num::shape_string(c.input_shape));
  }
  const num::Var x = t.constant(images.reshaped({n, d}));
  const auto& p = c.params;
  const num::Var h1 = t.relu(t.dense(x, t.param(p, "fc1.w"), t.param(p, "fc1.b")));
  const num::Var h2 = t.relu(t.dense(h1, t.param(p, "fc2.w"), t.param(p, "fc2.b")));
  return {h2, t.dense(h2, t.param(p, "fc3.w"), t.param(p, "fc3.b"))};
}

Tensor he_init(num::Shape shape, std::size_t fan_in, num::Rng& rng) {
  Tensor t(std::move(shape));
  const double s = std::sqrt(2.0 / double(fan_in));
  for (auto& v : t.data()) v = static_cast<float>(s * rng.normal());
  return t;
}

}  // namespace

void to_json(nlohmann::json& j, const ClassifierConfig& c) {
  j = nlohmann::json{{"hidden", c.hidden},
                     {"feature_width", c.feature_width},
                     {"iterations", c.iterations},
                     {"batch", c.batch},
                     {"lr", c.optimizer.lr},
                     {"weight_decay", c.optimizer.weight_decay},
                     {"holdout_fraction", c.holdout_fraction},
                     {"input_noise", c.input_noise},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ClassifierConfig& c) {
  c = ClassifierConfig{};
  c.hidden = j.value("hidden", c.hidden);
  c.feature_width = j.value("feature_width", c.feature_width);
  c.iterations = j.value("iterations", c.iterations);
  c.batch = j.value("batch", c.batch);
  c.optimizer.lr = j.value("lr", c.optimizer.lr);
  c.optimizer.weight_decay = j.value("weight_decay", c.optimizer.weight_decay);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.input_noise = j.value("input_noise", c.input_noise);
  c.seed = j.value("seed", c.seed);
}

TrainedClassifier train_fidelity_classifier(const data::PairedDataset& dataset, const ClassifierConfig& config) {
  std::set<std::uint32_t> classes;
  for (const auto& c : dataset.conditions) {
    if (c.is_null()) throw ArgumentError("classifier training data contains null conditions");
    classes.insert(c.class_id);
  }
  if (classes.size() < 2) throw ArgumentError("fidelity classifier needs at least two classes");
  if (!(config.holdout_fraction >= 0.0 && config.holdout_fraction < 1.0)) {
    throw ArgumentError("holdout fraction must lie in [0, 1)");
  }

  FidelityClassifier fc;
  fc.input_shape = dataset.item_shape;
  fc.class_count = *classes.rbegin() + 1;
  fc.hidden = config.hidden;
  fc.feature_width = config.feature_width;
  const std::size_t d = dataset.item_size();
  num::Rng init(config.seed, "classifier-init");
  fc.params.add("fc1.w", he_init({d, fc.hidden}, d, init));
  fc.params.add("fc1.b", Tensor(num::Shape{fc.hidden}));
  fc.params.add("fc2.w", he_init({fc.hidden, fc.feature_width}, fc.hidden, init));
  fc.params.add("fc2.b", Tensor(num::Shape{fc.feature_width}));
  fc.params.add("fc3.w", he_init({fc.feature_width, fc.class_count}, fc.feature_width, init));
  fc.params.add("fc3.b", Tensor(num::Shape{fc.class_count}));

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  num::Rng split(config.seed, "classifier-split");
  std::shuffle(order.begin(), order.end(), split.engine());
  const auto held = static_cast<std::size_t>(std::floor(config.holdout_fraction * double(order.size())));
  const std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
  const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
  if (train.empty()) throw EmptyDatasetError("no training examples left after the holdout split");

  num::AdamW opt(fc.params, config.optimizer);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    opt.set_lr(num::cosine_lr(config.optimizer.lr, it, config.iterations));
    num::Rng rng(config.seed, "classifier-batch", {it});
    std::vector<std::size_t> rows(config.batch);
    std::vector<std::size_t> labels(config.batch);
    for (std::size_t b = 0; b < config.batch; ++b) {
      rows[b] = train[rng.below(train.size())];
      labels[b] = dataset.conditions[rows[b]].class_id;
    }
    Tensor x = dataset.gather(rows);
    if (config.input_noise > 0.0) {
      for (auto& v : x.data()) v += static_cast<float>(config.input_noise * rng.normal());
    }
    num::Tape<float> tape;
    const auto f = forward(tape, fc, x);
    const num::Var loss = tape.cross_entropy(f.logits, labels);
    tape.backward(loss);
    opt.step(fc.params, tape.gradients(fc.params));
  }

  TrainedClassifier out;
  out.held_out_count = test.size();
  if (!test.empty()) {
    const auto pred = classify(fc, dataset.gather(test));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) correct += pred[i] == dataset.conditions[test[i]].class_id;
    out.held_out_accuracy = double(correct) / double(test.size());
  }
  out.classifier = std::move(fc);
  return out;
}

Tensor classifier_logits(const FidelityClassifier& c, const Tensor& images) {
  num::Tape<float> tape(false);
  return tape.value(forward(tape, c, images).logits);
}

std::vector<std::size_t> classify(const FidelityClassifier& c, const Tensor& images) {
  const Tensor logits = classifier_logits(c, images);
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = logits.ptr() + i * k;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

Tensor classifier_features(const FidelityClassifier& c, const Tensor& images) {
  num::Tape<float> tape(false);
  return tape.value(forward(tape, c, images).features);
}

}  // namespace rclab::eval
