#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "rclab/data/cache.hpp"
#include "rclab/distill/batch.hpp"
#include "rclab/distill/teacher.hpp"
#include "rclab/models/projection.hpp"

namespace rclab::distill {

using num::Var;

struct DistillConfig {
  double w_out = 1.0;
  double w_feat = 1.0;
  double null_prob = 0.1;
  std::size_t batch = 128;
  std::size_t iterations = 10000;
  num::AdamWConfig optimizer{};
  RandomConditioningPolicy policy{};
  std::uint64_t seed = 0;
  bool use_feature_loss = true;
  // Cosine decay of the learning rate to zero over `iterations`.
  bool cosine_decay = false;
  // History granularity; 0 records only the final iteration.
  std::size_t log_every = 100;

  void validate() const;
  friend bool operator==(const DistillConfig&, const DistillConfig&) = default;
};

void to_json(nlohmann::json& j, const DistillConfig& c);
void from_json(const nlohmann::json& j, DistillConfig& c);

struct LossBreakdown {
  double out = 0.0;
  double feat = 0.0;
  double total = 0.0;
};

template <class Real>
struct LossVars {
  Var out;
  Var feat;
  Var total;
};

// Output and feature losses on one batch:
//   out  = mean over elements of (eps_T - eps_S)^2
//   feat = sum over tap pairs of mean (f_T - proj(f_S))^2
//   total = w_out * out + w_feat * feat (feat omitted when use_feature_loss is false)
// The teacher runs on a separate non-recording tape; only student and head
// parameters bound on `tape` can receive gradients.
template <class Real>
LossVars<Real> distill_loss(num::Tape<Real>& tape, const DenoiserSpec& teacher_spec,
                            const num::BasicParamSet<Real>& teacher, const DenoiserSpec& student_spec,
                            const num::BasicParamSet<Real>& student, std::span<const models::TapPair> pairs,
                            const num::BasicParamSet<Real>& heads, const num::BasicTensor<Real>& x_t,
                            std::span<const std::size_t> t, std::span<const Condition> c, const DistillConfig& config);

// Everything needed to continue a distillation run bit-exactly. Per-example
// random streams are keyed by (seed, iteration, example), so the iteration
// counter is the only stream position.
struct TrainState {
  std::uint64_t iteration = 0;
  num::ParamSet student;
  num::ParamSet heads;
  num::AdamW student_opt;
  num::AdamW heads_opt;
  // Exponential moving averages (factor 0.98) of the per-iteration losses.
  LossBreakdown running;
};

void save_train_state(const TrainState& state, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

// Owns the mutable state of one distillation run.
class Distiller {
 public:
  Distiller(const DenoiserModel& teacher, DenoiserModel student, data::PairedDataset source, data::ConditionPool pool,
            DistillConfig config, const diffusion::NoiseSchedule& sched);

  // Draws the batch for the current iteration, applies one AdamW update to
  // student and heads, and advances the iteration counter. A non-finite value
  // raises NumericError carrying the iteration index.
  LossBreakdown step();
  // Same update on a caller-supplied batch; the iteration still advances.
  LossBreakdown step(const NoisedBatch& batch);

  NoisedBatch batch_for(std::uint64_t iteration) const;

  const TrainState& state() const noexcept { return state_; }
  void restore(TrainState state);

  // The student alone; projection heads are not part of the result.
  DenoiserModel student() const { return {student_spec_, state_.student}; }
  const models::ProjectionHeads& heads_layout() const noexcept { return layout_; }
  const DistillConfig& config() const noexcept { return config_; }

 private:
  DenoiserModel teacher_;
  DenoiserSpec student_spec_;
  data::PairedDataset source_;
  data::ConditionPool pool_;
  DistillConfig config_;
  diffusion::NoiseSchedule sched_;
  models::ProjectionHeads layout_;
  TrainState state_;
};

enum class StudentInit { Random, Teacher };

struct StudentPlan {
  DenoiserSpec spec;
  StudentInit init = StudentInit::Random;
  std::uint64_t init_seed = 0;
};

DenoiserModel make_student(const DenoiserModel& teacher, const StudentPlan& plan);

struct HistoryPoint {
  std::uint64_t iteration = 0;
  LossBreakdown loss;
  LossBreakdown running;
};

struct DistillResult {
  DenoiserModel student;
  std::vector<HistoryPoint> history;
};

// Called after iteration `i` when snapshot.every divides i (and at the end).
struct Snapshot {
  std::size_t every = 0;
  std::function<void(const Distiller&)> fn;
};

DistillResult run_distillation(const DenoiserModel& teacher, const StudentPlan& plan,
                               const data::PairedDataset& source, const data::ConditionPool& pool,
                               const DistillConfig& config, const diffusion::NoiseSchedule& sched,
                               const Snapshot& snapshot = {});

// Image-free variant over cached teacher generations.
DistillResult run_distillation(const DenoiserModel& teacher, const StudentPlan& plan,
                               const data::GenerationCache& source, const data::ConditionPool& pool,
                               const DistillConfig& config, const diffusion::NoiseSchedule& sched,
                               const Snapshot& snapshot = {});

}  // namespace rclab::distill
