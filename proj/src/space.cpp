#include "capacitylab/space.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

#include "capacitylab/errors.hpp"

namespace capacitylab {

std::string to_string(const NodePath& t) {
  if (t.empty()) return "()";
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += '.';
    out += std::to_string(t[i]);
  }
  return out;
}

ProductTreeSpace::ProductTreeSpace(std::vector<std::size_t> arities) : arities_(std::move(arities)) {
  if (arities_.empty()) throw std::invalid_argument("ProductTreeSpace: depth must be at least 1");
  strides_.assign(arities_.size() + 1, 1);
  for (std::size_t j = arities_.size(); j-- > 0;) {
    if (arities_[j] == 0) throw std::invalid_argument("ProductTreeSpace: arity must be positive");
    if (strides_[j + 1] > kMaxLeaves / arities_[j])
      throw std::invalid_argument("ProductTreeSpace: more than 2^20 leaves");
    strides_[j] = strides_[j + 1] * arities_[j];
  }
}

bool ProductTreeSpace::is_valid(const NodePath& t) const {
  if (t.size() > depth()) return false;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= arities_[i]) return false;
  return true;
}

void ProductTreeSpace::validate(const NodePath& t) const {
  if (t.size() > depth())
    throw InvalidPath("path " + to_string(t) + " is longer than the space depth");
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] >= arities_[i])
      throw InvalidPath("path " + to_string(t) + ": coordinate " + std::to_string(i) + " out of range");
}

NodePath ProductTreeSpace::leaf_path(std::size_t leaf) const { return node_at(depth(), leaf); }

std::size_t ProductTreeSpace::leaf_index(const NodePath& leaf) const {
  if (leaf.size() != depth()) throw InvalidPath("leaf_index: " + to_string(leaf) + " is not a leaf");
  return node_rank(leaf);
}

std::size_t ProductTreeSpace::node_rank(const NodePath& t) const {
  validate(t);
  std::size_t rank = 0;
  for (std::size_t i = 0; i < t.size(); ++i) rank = rank * arities_[i] + t[i];
  return rank;
}

NodePath ProductTreeSpace::node_at(std::size_t length, std::size_t rank) const {
  if (length > depth() || rank >= nodes_at_length(length))
    throw InvalidPath("node_at: rank out of range");
  NodePath t(length);
  for (std::size_t i = length; i-- > 0;) {
    t[i] = rank % arities_[i];
    rank /= arities_[i];
  }
  return t;
}

std::pair<std::size_t, std::size_t> ProductTreeSpace::leaf_range(const NodePath& t) const {
  auto first = node_rank(t) * block_size(t.size());
  return {first, first + block_size(t.size())};
}

std::size_t ProductTreeSpace::common_prefix_length(std::size_t leaf_a, std::size_t leaf_b) const {
  std::size_t len = 0;
  while (len < depth() && leaf_a / strides_[len + 1] == leaf_b / strides_[len + 1]) ++len;
  return len;
}

void TreeMetric::validate() const {
  if (!(base > 0.0 && base < 1.0)) throw std::invalid_argument("TreeMetric: base must lie in (0,1)");
}

double TreeMetric::distance(const ProductTreeSpace& space, std::size_t leaf_a, std::size_t leaf_b) const {
  if (leaf_a == leaf_b) return 0.0;
  return diameter_at_length(space.common_prefix_length(leaf_a, leaf_b));
}

double TreeMetric::diameter_at_length(std::size_t length) const {
  return std::pow(base, static_cast<double>(length));
}

double parse_rational(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
  };
  auto parse_double = [](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw std::invalid_argument("not a number: '" + std::string(s) + "'");
    return v;
  };
  text = trim(text);
  auto slash = text.find('/');
  if (slash == std::string_view::npos) return parse_double(text);
  double num = parse_double(trim(text.substr(0, slash)));
  double den = parse_double(trim(text.substr(slash + 1)));
  if (den == 0.0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
  return num / den;
}

std::vector<NodePath> leaves(const ProductTreeSpace& space) {
  std::vector<NodePath> out;
  out.reserve(space.leaf_count());
  for (std::size_t i = 0; i < space.leaf_count(); ++i) out.push_back(space.leaf_path(i));
  return out;
}

PointSet basic_open(const ProductTreeSpace& space, const NodePath& t) {
  auto [first, last] = space.leaf_range(t);
  return PointSet::from_range(space.leaf_count(), first, last);
}

PointSet from_paths(const ProductTreeSpace& space, const std::vector<NodePath>& paths) {
  PointSet out(space.leaf_count());
  for (const auto& t : paths) {
    auto [first, last] = space.leaf_range(t);
    for (auto i = first; i < last; ++i) out.insert(i);
  }
  return out;
}

namespace {

void decompose(const ProductTreeSpace& space, const PointSet& A, NodePath& t, std::vector<NodePath>& out) {
  auto [first, last] = space.leaf_range(t);
  std::size_t inside = 0;
  for (auto i = first; i < last; ++i) inside += A.contains(i) ? 1 : 0;
  if (inside == 0) return;
  if (inside == last - first) {
    out.push_back(t);
    return;
  }
  for (std::size_t y = 0; y < space.arity(t.size()); ++y) {
    t.push_back(y);
    decompose(space, A, t, out);
    t.pop_back();
  }
}

}  // namespace

std::vector<NodePath> canonical_decomposition(const ProductTreeSpace& space, const PointSet& A) {
  if (A.universe() != space.leaf_count())
    throw std::invalid_argument("canonical_decomposition: set is not over this space");
  std::vector<NodePath> out;
  NodePath root;
  decompose(space, A, root, out);
  return out;
}

double diameter(const ProductTreeSpace& space, const TreeMetric& metric, const NodePath& t) {
  space.validate(t);
  return metric.diameter_at_length(t.size());
}

}  // namespace capacitylab
