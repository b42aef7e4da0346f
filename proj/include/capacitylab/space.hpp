#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "capacitylab/point_set.hpp"

namespace capacitylab {

/// Coordinates of a node in the product tree, one entry per level. The empty
/// path is the root (the whole space); paths of full depth are leaves.
using NodePath = std::vector<std::size_t>;

std::string to_string(const NodePath& t);

/// Finite product X_0 x ... x X_{d-1} with |X_i| = arities[i].
///
/// Leaves are numbered in lexicographic order, so every basic open set O_t is
/// a contiguous range of leaf indices.
class ProductTreeSpace {
 public:
  static constexpr std::size_t kMaxLeaves = std::size_t{1} << 20;

  // Throws std::invalid_argument on an empty arity list, a zero arity, or
  // more than kMaxLeaves leaves.
  explicit ProductTreeSpace(std::vector<std::size_t> arities);

  std::size_t depth() const { return arities_.size(); }
  std::size_t arity(std::size_t level) const { return arities_.at(level); }
  const std::vector<std::size_t>& arities() const { return arities_; }
  std::size_t leaf_count() const { return strides_.front(); }

  // Number of leaves below a node whose path has the given length.
  std::size_t block_size(std::size_t length) const { return strides_.at(length); }

  // Number of nodes whose path has the given length.
  std::size_t nodes_at_length(std::size_t length) const { return leaf_count() / block_size(length); }

  void validate(const NodePath& t) const;
  bool is_valid(const NodePath& t) const;

  NodePath leaf_path(std::size_t leaf) const;
  std::size_t leaf_index(const NodePath& leaf) const;

  // Lexicographic rank of t among all paths of its length.
  std::size_t node_rank(const NodePath& t) const;
  NodePath node_at(std::size_t length, std::size_t rank) const;

  // [first, last) leaf index range of O_t.
  std::pair<std::size_t, std::size_t> leaf_range(const NodePath& t) const;

  std::size_t common_prefix_length(std::size_t leaf_a, std::size_t leaf_b) const;

  bool operator==(const ProductTreeSpace& other) const { return arities_ == other.arities_; }

 private:
  std::vector<std::size_t> arities_;
  // strides_[j] = product of arities_[j..d-1]; strides_[d] = 1.
  std::vector<std::size_t> strides_;
};

/// base^(longest common prefix) ultrametric on the leaves.
struct TreeMetric {
  double base = 0.5;

  // Throws std::invalid_argument unless 0 < base < 1.
  void validate() const;

  double distance(const ProductTreeSpace& space, std::size_t leaf_a, std::size_t leaf_b) const;
  double diameter_at_length(std::size_t length) const;
};

// Parses "p/q", an integer, or a decimal literal.
double parse_rational(std::string_view text);

/// All leaves in lexicographic order.
std::vector<NodePath> leaves(const ProductTreeSpace& space);

/// Leaves extending t. Throws InvalidPath on an out-of-range coordinate.
PointSet basic_open(const ProductTreeSpace& space, const NodePath& t);

/// Union of the basic opens of the given paths.
PointSet from_paths(const ProductTreeSpace& space, const std::vector<NodePath>& paths);

/// The maximal paths whose basic opens lie inside A. They form an antichain,
/// their union is exactly A, and no smaller antichain has that union.
std::vector<NodePath> canonical_decomposition(const ProductTreeSpace& space, const PointSet& A);

double diameter(const ProductTreeSpace& space, const TreeMetric& metric, const NodePath& t);

}  // namespace capacitylab
