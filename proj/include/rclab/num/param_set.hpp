#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rclab/num/tensor.hpp"

namespace rclab::num {

// Named parameter tensors. Names are unique and a tensor's shape is fixed
// once added; element values may be updated in place.
template <class Real>
class BasicParamSet {
 public:
  struct Entry {
    std::string name;
    BasicTensor<Real> value;
    bool trainable = true;
  };

  void add(std::string name, BasicTensor<Real> value, bool trainable = true) {
    if (index_.contains(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{std::move(name), std::move(value), trainable});
  }

  bool contains(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ArgumentError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }

  const BasicTensor<Real>& get(std::string_view name) const { return entries_[index_of(name)].value; }

  // Overwrites values; the replacement must have the same shape.
  void assign(std::string_view name, const BasicTensor<Real>& value) {
    auto& e = entries_[index_of(name)];
    if (e.value.shape() != value.shape()) {
      throw ShapeError("parameter '" + e.name + "' has shape " + shape_string(e.value.shape()) +
                       ", cannot assign " + shape_string(value.shape()));
    }
    e.value = value;
  }

  std::span<Real> values(std::size_t i) { return entries_[i].value.data(); }
  std::span<Real> values(std::string_view name) { return values(index_of(name)); }

  void set_trainable(std::string_view name, bool trainable) { entries_[index_of(name)].trainable = trainable; }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  BasicParamSet zeros_like() const {
    BasicParamSet out;
    for (const auto& e : entries_) out.add(e.name, BasicTensor<Real>(e.value.shape()), e.trainable);
    return out;
  }

  template <class Other>
  BasicParamSet<Other> cast() const {
    BasicParamSet<Other> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<Other>(), e.trainable);
    return out;
  }

  friend bool operator==(const BasicParamSet& a, const BasicParamSet& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !bitwise_equal(a.entries_[i].value, b.entries_[i].value)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

using ParamSet = BasicParamSet<float>;
using ParamSet64 = BasicParamSet<double>;

}  // namespace rclab::num
