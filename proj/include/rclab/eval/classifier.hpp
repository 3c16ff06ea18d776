#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "rclab/data/dataset.hpp"
#include "rclab/num/adamw.hpp"

namespace rclab::eval {

using num::Tensor;

// Perceptron over flattened clean images: dense-relu-dense-relu-dense. The
// second hidden layer is the feature space used by feature_frechet.
struct FidelityClassifier {
  num::Shape input_shape;
  std::size_t class_count = 0;
  std::size_t hidden = 256;
  std::size_t feature_width = 32;
  num::ParamSet params;
};

struct ClassifierConfig {
  std::size_t hidden = 256;
  std::size_t feature_width = 32;
  std::size_t iterations = 3000;
  std::size_t batch = 128;
  num::AdamWConfig optimizer{.lr = 1e-3, .weight_decay = 1e-4};
  double holdout_fraction = 0.2;
  // Std of Gaussian pixel noise added to training inputs.
  double input_noise = 0.05;
  std::uint64_t seed = 0;

  friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

void to_json(nlohmann::json& j, const ClassifierConfig& c);
void from_json(const nlohmann::json& j, ClassifierConfig& c);

struct TrainedClassifier {
  FidelityClassifier classifier;
  double held_out_accuracy = 0.0;
  std::size_t held_out_count = 0;
};

// Labels are class ids. Class count is the largest id + 1. A random
// holdout_fraction of the examples (chosen per seed) is held out for
// evaluation. Throws ArgumentError when fewer than two classes are present.
TrainedClassifier train_fidelity_classifier(const data::PairedDataset& dataset, const ClassifierConfig& config);

// Row logits [n, class_count].
Tensor classifier_logits(const FidelityClassifier& c, const Tensor& images);
std::vector<std::size_t> classify(const FidelityClassifier& c, const Tensor& images);
// Penultimate activations [n, feature_width].
Tensor classifier_features(const FidelityClassifier& c, const Tensor& images);

}  // namespace rclab::eval
