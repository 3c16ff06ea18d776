#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rclab/models/condition.hpp"
#include "rclab/num/param_set.hpp"
#include "rclab/num/tape.hpp"

namespace rclab::models {

using num::Shape;
using num::Tensor;
using num::Var;

enum class Arch { Mlp, Conv };

// Architecture of a conditional noise-prediction network.
//
// Mlp: residual perceptron over the flattened input. The input layer sees
//   [x, time embedding, condition embedding]; each block adds a projection of
//   the (time, condition) embedding between its two dense layers.
// Conv: residual 3x3 conv network over [C,H,W] inputs with the embedding
//   projection added per channel inside each block.
//
// `taps` lists the block indices whose outputs are exposed as features.
struct DenoiserSpec {
  Arch arch = Arch::Mlp;
  Shape input_shape{2};
  std::size_t width = 64;
  std::size_t depth = 4;
  std::size_t cond_width = 32;
  std::size_t time_width = 32;
  std::size_t class_count = 8;
  std::size_t style_count = 0;
  std::size_t groups = 8;
  std::vector<std::size_t> taps;

  // Throws ArgumentError describing the first violated constraint.
  void validate() const;
  std::size_t input_size() const { return num::shape_size(input_shape); }

  friend bool operator==(const DenoiserSpec&, const DenoiserSpec&) = default;
};

// Spec with taps on every block.
DenoiserSpec with_all_taps(DenoiserSpec spec);

void to_json(nlohmann::json& j, const DenoiserSpec& s);
void from_json(const nlohmann::json& j, DenoiserSpec& s);

void to_json(nlohmann::json& j, const Condition& c);
void from_json(const nlohmann::json& j, Condition& c);

struct DenoiserModel {
  DenoiserSpec spec;
  num::ParamSet params;
};

// Deterministic initialization from a seed.
DenoiserModel build_model(const DenoiserSpec& spec, std::uint64_t init_seed);

// Embedding-table rows for a condition; validates ids against the spec.
std::size_t class_row(const DenoiserSpec& spec, const Condition& c);
std::size_t style_row(const DenoiserSpec& spec, const Condition& c);

template <class Real>
struct DenoiserOutput {
  Var eps;
  std::vector<Var> features;
};

// Records one forward pass on `tape`. x has shape [B, input_shape...];
// `timesteps` and `conds` have B entries each.
template <class Real>
DenoiserOutput<Real> denoise(num::Tape<Real>& tape, const DenoiserSpec& spec,
                             const num::BasicParamSet<Real>& params, Var x,
                             std::span<const std::size_t> timesteps, std::span<const Condition> conds);

// Gradient-free convenience: predicted noise for a batch.
Tensor predict_eps(const DenoiserModel& model, const Tensor& x, std::span<const std::size_t> timesteps,
                   std::span<const Condition> conds);

// Sinusoidal timestep embedding [B, width].
template <class Real>
num::BasicTensor<Real> timestep_embedding(std::span<const std::size_t> timesteps, std::size_t width);

// Teacher block indices a depth-pruned student of `student_depth` keeps.
std::vector<std::size_t> retained_blocks(std::size_t teacher_depth, std::size_t student_depth);

// Copies shared and retained-block parameters from the teacher. The student
// must differ from the teacher only in depth (<= teacher depth) and taps;
// anything else raises IncompatibleArchitectureError.
DenoiserModel init_student_from_teacher(const DenoiserModel& teacher, const DenoiserSpec& student_spec);

}  // namespace rclab::models
