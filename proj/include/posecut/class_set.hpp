#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace posecut {

using ClassId = std::size_t;
using CandidateId = std::size_t;

// Upper bound on |C|; class sets are stored as one machine word.
inline constexpr std::size_t kMaxClasses = 64;

// Set of part classes, used for labeling restrictions and stage schedules.
class ClassSet {
 public:
  constexpr ClassSet() = default;

  static constexpr ClassSet all(std::size_t num_classes) {
    ClassSet s;
    s.bits_ = num_classes >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << num_classes) - 1);
    return s;
  }
  static constexpr ClassSet of(ClassId c) {
    ClassSet s;
    s.insert(c);
    return s;
  }

  constexpr void insert(ClassId c) { bits_ |= std::uint64_t{1} << c; }
  constexpr void erase(ClassId c) { bits_ &= ~(std::uint64_t{1} << c); }
  constexpr bool contains(ClassId c) const { return c < kMaxClasses && ((bits_ >> c) & 1U) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr std::uint64_t bits() const { return bits_; }

  std::vector<ClassId> members() const {
    std::vector<ClassId> out;
    for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
      out.push_back(static_cast<ClassId>(std::countr_zero(b)));
    }
    return out;
  }

  friend constexpr ClassSet operator&(ClassSet a, ClassSet b) {
    a.bits_ &= b.bits_;
    return a;
  }
  friend constexpr ClassSet operator|(ClassSet a, ClassSet b) {
    a.bits_ |= b.bits_;
    return a;
  }
  friend constexpr bool operator==(ClassSet, ClassSet) = default;

 private:
  std::uint64_t bits_ = 0;
};

}  // namespace posecut
