#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace capacitylab {

/// A subset of a finite universe {0, ..., universe-1}, stored as a bitset.
///
/// Leaves of a ProductTreeSpace, evaluation points of a potential space and
/// plain point sets for joins all use this type; the universe size is part
/// of the value, and binary operations require equal universes.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::size_t universe);

  static PointSet full(std::size_t universe);
  static PointSet from_mask(std::size_t universe, std::uint64_t mask);
  static PointSet from_indices(std::size_t universe, std::span<const std::size_t> indices);
  static PointSet from_range(std::size_t universe, std::size_t first, std::size_t last);

  std::size_t universe() const { return universe_; }
  std::size_t count() const;
  bool empty() const;

  bool contains(std::size_t i) const;
  void insert(std::size_t i);
  void erase(std::size_t i);

  bool is_subset_of(const PointSet& other) const;
  bool intersects(const PointSet& other) const;

  PointSet operator|(const PointSet& other) const;
  PointSet operator&(const PointSet& other) const;
  PointSet operator-(const PointSet& other) const;
  PointSet complement() const;
  PointSet& operator|=(const PointSet& other);
  PointSet& operator&=(const PointSet& other);

  std::vector<std::size_t> indices() const;

  // Only valid for universes of at most 64 points.
  std::uint64_t to_mask() const;

  bool operator==(const PointSet& other) const = default;
  bool operator<(const PointSet& other) const;

  std::size_t hash() const;

  // "{0,3,5}"
  std::string to_string() const;

 private:
  void check_same_universe(const PointSet& other) const;
  void trim();

  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace capacitylab

template <>
struct std::hash<capacitylab::PointSet> {
  std::size_t operator()(const capacitylab::PointSet& s) const noexcept { return s.hash(); }
};
