#include "rclab/data/dataset.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace rclab::data {

void PairedDataset::push_back(std::span<const float> item, const Condition& c) {
  if (item.size() != item_size()) {
    throw ShapeError("dataset item has " + std::to_string(item.size()) + " values, expected " +
                     std::to_string(item_size()));
  }
  pixels.insert(pixels.end(), item.begin(), item.end());
  conditions.push_back(c);
}

std::span<const float> PairedDataset::item(std::size_t i) const {
  const std::size_t n = item_size();
  return std::span<const float>(pixels).subspan(i * n, n);
}

Tensor PairedDataset::gather(std::span<const std::size_t> indices) const {
  Shape s{indices.size()};
  s.insert(s.end(), item_shape.begin(), item_shape.end());
  Tensor out(s);
  const std::size_t n = item_size();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto src = item(indices[k]);
    std::copy(src.begin(), src.end(), out.ptr() + k * n);
  }
  return out;
}

std::set<Condition> PairedDataset::distinct_conditions() const {
  return std::set<Condition>(conditions.begin(), conditions.end());
}

ConditionPool labeled_pool(std::size_t classes) {
  ConditionPool pool;
  for (std::size_t c = 0; c < classes; ++c) pool.conditions.push_back(Condition::labeled(static_cast<std::uint32_t>(c)));
  return pool;
}

Exclusion exclude_conditions(const PairedDataset& d, const std::function<bool(const Condition&)>& predicate) {
  Exclusion ex;
  ex.kept.item_shape = d.item_shape;
  ex.kept.provenance = d.provenance;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (predicate(d.conditions[i])) {
      ex.removed_conditions.insert(d.conditions[i]);
      ex.removed_indices.push_back(i);
    } else {
      ex.kept.push_back(d.item(i), d.conditions[i]);
      ex.kept_indices.push_back(i);
    }
  }
  if (ex.kept.empty()) throw EmptyDatasetError("condition exclusion removed every example");
  return ex;
}

PairedDataset class_labels_only(PairedDataset d) {
  for (auto& c : d.conditions) c = c.class_only();
  return d;
}

PairedDataset take_per_condition(const PairedDataset& d, std::size_t count) {
  PairedDataset out;
  out.item_shape = d.item_shape;
  out.provenance = d.provenance;
  std::map<Condition, std::size_t> seen;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (seen[d.conditions[i]]++ < count) out.push_back(d.item(i), d.conditions[i]);
  }
  return out;
}

}  // namespace rclab::data
