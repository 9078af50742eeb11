#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string_view>

namespace bimcap {

// Order is part of the PLY contract (the `class` uchar property).
enum class SemanticClass : std::uint8_t {
  wall = 0,
  column = 1,
  floor = 2,
  ceiling = 3,
  window = 4,
  door = 5,
  other = 6,
};

inline constexpr std::size_t kNumSemanticClasses = 7;

inline constexpr std::array<SemanticClass, kNumSemanticClasses> kAllSemanticClasses = {
    SemanticClass::wall,   SemanticClass::column, SemanticClass::floor, SemanticClass::ceiling,
    SemanticClass::window, SemanticClass::door,   SemanticClass::other,
};

class ClassSet {
 public:
  constexpr ClassSet() = default;
  constexpr ClassSet(std::initializer_list<SemanticClass> classes) {
    for (SemanticClass c : classes) insert(c);
  }
  constexpr void insert(SemanticClass c) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(c)); }
  [[nodiscard]] constexpr bool contains(SemanticClass c) const {
    return (bits_ >> static_cast<unsigned>(c)) & 1u;
  }
  [[nodiscard]] constexpr bool empty() const { return bits_ == 0; }

 private:
  std::uint8_t bits_ = 0;
};

std::string_view class_name(SemanticClass c);

// Exact lowercase match of a known class name; "clutter" is accepted as an alias of other.
std::optional<SemanticClass> parse_class(std::string_view name);

std::optional<SemanticClass> class_from_index(int index);

}  // namespace bimcap
