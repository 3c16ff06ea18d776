#include "rclab/distill/batch.hpp"

#include <algorithm>

#include "rclab/errors.hpp"

namespace rclab::distill {

NoisedBatch draw_batch(const data::PairedDataset& source, const diffusion::NoiseSchedule& sched,
                       const BatchRecipe& recipe, std::uint64_t seed, std::string_view purpose,
                       std::uint64_t iteration) {
  if (source.empty()) throw EmptyDatasetError("cannot draw a batch from an empty dataset");
  if (recipe.batch == 0) throw ArgumentError("batch size must be positive");
  const bool swap = recipe.policy.kind != PolicyKind::Off;
  if (swap && (recipe.pool == nullptr || recipe.pool->conditions.empty())) {
    throw ArgumentError("random conditioning needs a non-empty condition pool");
  }
  const std::size_t n = recipe.batch;
  const std::size_t row = source.item_size();
  num::Shape shape{n};
  shape.insert(shape.end(), source.item_shape.begin(), source.item_shape.end());

  NoisedBatch out;
  out.eps = Tensor(shape);
  out.t.resize(n);
  out.c.resize(n);
  std::vector<std::size_t> rows(n);
  for (std::size_t b = 0; b < n; ++b) {
    num::Rng rng(seed, purpose, {iteration, b});
    rows[b] = rng.below(source.size());
    out.t[b] = rng.below(sched.steps);
    for (std::size_t k = 0; k < row; ++k) out.eps[b * row + k] = static_cast<float>(rng.normal());
    Condition c = source.conditions[rows[b]];
    if (swap) c = sample_condition(recipe.policy, out.t[b], sched.steps, c, *recipe.pool, rng);
    if (rng.uniform() < recipe.null_prob) c = Condition::null();
    out.c[b] = c;
  }
  out.x_t = diffusion::forward_diffuse_rows(source.gather(rows), out.t, out.eps, sched);
  return out;
}

}  // namespace rclab::distill
