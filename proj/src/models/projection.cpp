#include "rclab/models/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rclab/num/rng.hpp"

namespace rclab::models {

namespace {

std::string head_name(std::size_t i) { return "head" + std::to_string(i) + ".w"; }

std::size_t tap_index(const std::vector<std::size_t>& taps, std::size_t block) {
  const auto it = std::find(taps.begin(), taps.end(), block);
  return it == taps.end() ? taps.size() : static_cast<std::size_t>(it - taps.begin());
}

}  // namespace

std::vector<TapPair> feature_pairs(const DenoiserSpec& teacher, const DenoiserSpec& student) {
  const bool pruned = teacher.width == student.width && student.depth <= teacher.depth;
  std::vector<std::size_t> source(student.depth);
  if (pruned) {
    source = retained_blocks(teacher.depth, student.depth);
  } else {
    for (std::size_t s = 0; s < student.depth; ++s) {
      const double end = double(s + 1) * double(teacher.depth) / double(student.depth);
      source[s] = static_cast<std::size_t>(std::max(1.0, std::round(end))) - 1;
    }
  }
  std::vector<TapPair> pairs;
  for (std::size_t si = 0; si < student.taps.size(); ++si) {
    const std::size_t ti = tap_index(teacher.taps, source[student.taps[si]]);
    if (ti < teacher.taps.size()) pairs.push_back({ti, si});
  }
  return pairs;
}

ProjectionHeads build_heads(Arch arch, std::span<const std::size_t> student_widths,
                            std::span<const std::size_t> teacher_widths, std::uint64_t seed) {
  if (student_widths.size() != teacher_widths.size()) throw ArgumentError("head width lists differ in length");
  ProjectionHeads heads;
  heads.arch = arch;
  num::Rng rng(seed, "projection-heads");
  for (std::size_t i = 0; i < student_widths.size(); ++i) {
    const std::size_t sw = student_widths[i], tw = teacher_widths[i];
    Tensor w = arch == Arch::Mlp ? Tensor(Shape{sw, tw}) : Tensor(Shape{tw, sw, 1, 1});
    if (sw == tw) {
      for (std::size_t k = 0; k < sw; ++k) w[k * sw + k] = 1.0f;
    } else {
      const double sd = 1.0 / std::sqrt(double(sw));
      // Both layouts index the [sw,tw] matrix through (row, col) -> element.
      for (std::size_t r = 0; r < sw; ++r) {
        for (std::size_t c = 0; c < tw; ++c) {
          const std::size_t idx = arch == Arch::Mlp ? r * tw + c : c * sw + r;
          w[idx] = static_cast<float>(rng.normal() * sd);
        }
      }
    }
    heads.params.add(head_name(i), std::move(w));
    heads.pairs.push_back({i, i});
  }
  return heads;
}

ProjectionHeads build_heads(const DenoiserSpec& teacher, const DenoiserSpec& student, std::uint64_t seed) {
  const auto pairs = feature_pairs(teacher, student);
  std::vector<std::size_t> sw(pairs.size(), student.width), tw(pairs.size(), teacher.width);
  ProjectionHeads heads = build_heads(student.arch, sw, tw, seed);
  heads.pairs = pairs;
  return heads;
}

template <class Real>
std::vector<Var> project_features(num::Tape<Real>& tape, Arch arch, const num::BasicParamSet<Real>& heads,
                                  std::span<const Var> features) {
  if (features.size() != heads.size()) {
    throw ArgumentError("project_features: " + std::to_string(features.size()) + " features for " +
                        std::to_string(heads.size()) + " heads");
  }
  std::vector<Var> out;
  out.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const Var w = tape.param(heads, head_name(i));
    if (arch == Arch::Mlp) {
      out.push_back(tape.dense(features[i], w));
    } else {
      const Var zero = tape.constant(num::BasicTensor<Real>(num::Shape{tape.value(w).dim(0)}));
      out.push_back(tape.conv2d(features[i], w, zero));
    }
  }
  return out;
}

template std::vector<Var> project_features<float>(num::Tape<float>&, Arch, const num::ParamSet&, std::span<const Var>);
template std::vector<Var> project_features<double>(num::Tape<double>&, Arch, const num::ParamSet64&,
                                                   std::span<const Var>);

}  // namespace rclab::models
