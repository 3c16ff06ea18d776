#pragma once

#include <functional>
#include <set>
#include <span>
#include <vector>

#include "rclab/models/condition.hpp"
#include "rclab/num/tensor.hpp"

namespace rclab::data {

using models::Condition;
using num::Shape;
using num::Tensor;

enum class Provenance { Real, Generated };

// Image-condition pairs stored contiguously. Every item has `item_shape`.
struct PairedDataset {
  Shape item_shape;
  std::vector<float> pixels;
  std::vector<Condition> conditions;
  Provenance provenance = Provenance::Real;

  std::size_t size() const noexcept { return conditions.size(); }
  bool empty() const noexcept { return conditions.empty(); }
  std::size_t item_size() const { return num::shape_size(item_shape); }

  void push_back(std::span<const float> item, const Condition& c);
  std::span<const float> item(std::size_t i) const;
  // Rows `indices` stacked into [n, item_shape...].
  Tensor gather(std::span<const std::size_t> indices) const;
  std::set<Condition> distinct_conditions() const;
};

// The condition set C random conditioning draws from.
struct ConditionPool {
  std::vector<Condition> conditions;

  std::size_t size() const noexcept { return conditions.size(); }
};

// Labeled(0..classes-1).
ConditionPool labeled_pool(std::size_t classes);

struct Exclusion {
  PairedDataset kept;
  std::set<Condition> removed_conditions;
  std::vector<std::size_t> kept_indices;
  std::vector<std::size_t> removed_indices;
};

// Drops every example whose condition matches the predicate. Throws
// EmptyDatasetError when nothing would remain.
Exclusion exclude_conditions(const PairedDataset& d, const std::function<bool(const Condition&)>& predicate);

// Same images with every condition reduced to its class label.
PairedDataset class_labels_only(PairedDataset d);

// First `count` examples of each condition, in original order.
PairedDataset take_per_condition(const PairedDataset& d, std::size_t count);

}  // namespace rclab::data
