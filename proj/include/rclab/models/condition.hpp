#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace rclab::models {

// Conditioning token: a class label, a (class, style) pair, or the reserved
// null token used for classifier-free guidance.
struct Condition {
  enum class Kind : std::uint8_t { Null, Labeled, Composite };

  Kind kind = Kind::Null;
  std::uint32_t class_id = 0;
  std::uint32_t style_id = 0;

  static constexpr Condition null() { return {}; }
  static constexpr Condition labeled(std::uint32_t c) { return {Kind::Labeled, c, 0}; }
  static constexpr Condition composite(std::uint32_t c, std::uint32_t s) { return {Kind::Composite, c, s}; }

  constexpr bool is_null() const { return kind == Kind::Null; }

  // Drops the style component; Null stays Null.
  constexpr Condition class_only() const { return is_null() ? null() : labeled(class_id); }

  friend constexpr auto operator<=>(const Condition&, const Condition&) = default;

  // "null", "3" or "3:2".
  std::string to_string() const {
    switch (kind) {
      case Kind::Null:
        return "null";
      case Kind::Labeled:
        return std::to_string(class_id);
      case Kind::Composite:
        return std::to_string(class_id) + ":" + std::to_string(style_id);
    }
    return "null";
  }
};

}  // namespace rclab::models
