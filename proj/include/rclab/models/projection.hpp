#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rclab/models/denoiser.hpp"

namespace rclab::models {

// Index pair into the teacher's and the student's tapped feature lists.
struct TapPair {
  std::size_t teacher = 0;
  std::size_t student = 0;
  friend bool operator==(const TapPair&, const TapPair&) = default;
};

// Which student features are matched to which teacher features.
// Depth-pruned students (same width) pair each block with the teacher block
// it was copied from; other students pair block s with the teacher block
// ending the corresponding uniform stage, round((s+1)*D/d)-1. Only blocks
// tapped on both sides produce a pair.
std::vector<TapPair> feature_pairs(const DenoiserSpec& teacher, const DenoiserSpec& student);

// Temporary linear maps from student feature width to teacher feature width,
// one per tap pair, without bias. Discarded once distillation finishes.
struct ProjectionHeads {
  Arch arch = Arch::Mlp;
  std::vector<TapPair> pairs;
  num::ParamSet params;

  std::size_t size() const noexcept { return pairs.size(); }
};

// Heads are identity-initialized when widths match, otherwise drawn from
// N(0, 1/student_width).
ProjectionHeads build_heads(const DenoiserSpec& teacher, const DenoiserSpec& student, std::uint64_t seed);

// Heads with explicit widths (one per entry), identity-initialized when equal.
ProjectionHeads build_heads(Arch arch, std::span<const std::size_t> student_widths,
                            std::span<const std::size_t> teacher_widths, std::uint64_t seed);

// Maps features[i] through head i. Feature count must equal head count.
template <class Real>
std::vector<Var> project_features(num::Tape<Real>& tape, Arch arch, const num::BasicParamSet<Real>& heads,
                                  std::span<const Var> features);

}  // namespace rclab::models
