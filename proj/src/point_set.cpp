#include "capacitylab/point_set.hpp"

#include <bit>
#include <stdexcept>

namespace capacitylab {

namespace {
constexpr std::size_t kWordBits = 64;

std::size_t word_count(std::size_t universe) { return (universe + kWordBits - 1) / kWordBits; }
}  // namespace

PointSet::PointSet(std::size_t universe) : universe_(universe), words_(word_count(universe), 0) {}

PointSet PointSet::full(std::size_t universe) {
  PointSet s(universe);
  for (auto& w : s.words_) w = ~std::uint64_t{0};
  s.trim();
  return s;
}

PointSet PointSet::from_mask(std::size_t universe, std::uint64_t mask) {
  if (universe > kWordBits) throw std::invalid_argument("from_mask: universe larger than 64");
  PointSet s(universe);
  if (universe > 0) s.words_[0] = mask;
  s.trim();
  if (universe > 0 && s.words_[0] != mask) throw std::invalid_argument("from_mask: bits outside universe");
  return s;
}

PointSet PointSet::from_indices(std::size_t universe, std::span<const std::size_t> indices) {
  PointSet s(universe);
  for (auto i : indices) s.insert(i);
  return s;
}

PointSet PointSet::from_range(std::size_t universe, std::size_t first, std::size_t last) {
  PointSet s(universe);
  for (std::size_t i = first; i < last; ++i) s.insert(i);
  return s;
}

std::size_t PointSet::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool PointSet::empty() const {
  for (auto w : words_)
    if (w != 0) return false;
  return true;
}

bool PointSet::contains(std::size_t i) const {
  if (i >= universe_) return false;
  return (words_[i / kWordBits] >> (i % kWordBits)) & 1U;
}

void PointSet::insert(std::size_t i) {
  if (i >= universe_) throw std::out_of_range("PointSet::insert: index outside universe");
  words_[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
}

void PointSet::erase(std::size_t i) {
  if (i >= universe_) return;
  words_[i / kWordBits] &= ~(std::uint64_t{1} << (i % kWordBits));
}

bool PointSet::is_subset_of(const PointSet& other) const {
  check_same_universe(other);
  for (std::size_t k = 0; k < words_.size(); ++k)
    if (words_[k] & ~other.words_[k]) return false;
  return true;
}

bool PointSet::intersects(const PointSet& other) const {
  check_same_universe(other);
  for (std::size_t k = 0; k < words_.size(); ++k)
    if (words_[k] & other.words_[k]) return true;
  return false;
}

PointSet PointSet::operator|(const PointSet& other) const {
  PointSet r = *this;
  r |= other;
  return r;
}

PointSet PointSet::operator&(const PointSet& other) const {
  PointSet r = *this;
  r &= other;
  return r;
}

PointSet PointSet::operator-(const PointSet& other) const {
  check_same_universe(other);
  PointSet r = *this;
  for (std::size_t k = 0; k < words_.size(); ++k) r.words_[k] &= ~other.words_[k];
  return r;
}

PointSet PointSet::complement() const {
  PointSet r = *this;
  for (auto& w : r.words_) w = ~w;
  r.trim();
  return r;
}

PointSet& PointSet::operator|=(const PointSet& other) {
  check_same_universe(other);
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= other.words_[k];
  return *this;
}

PointSet& PointSet::operator&=(const PointSet& other) {
  check_same_universe(other);
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= other.words_[k];
  return *this;
}

std::vector<std::size_t> PointSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < words_.size(); ++k) {
    auto w = words_[k];
    while (w) {
      auto bit = static_cast<std::size_t>(std::countr_zero(w));
      out.push_back(k * kWordBits + bit);
      w &= w - 1;
    }
  }
  return out;
}

std::uint64_t PointSet::to_mask() const {
  if (universe_ > kWordBits) throw std::logic_error("PointSet::to_mask: universe larger than 64");
  return words_.empty() ? 0 : words_[0];
}

bool PointSet::operator<(const PointSet& other) const {
  if (universe_ != other.universe_) return universe_ < other.universe_;
  for (std::size_t k = words_.size(); k-- > 0;)
    if (words_[k] != other.words_[k]) return words_[k] < other.words_[k];
  return false;
}

std::size_t PointSet::hash() const {
  // FNV-1a over the words
  std::uint64_t h = 1469598103934665603ULL ^ universe_;
  for (auto w : words_) {
    h ^= w;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

std::string PointSet::to_string() const {
  std::string out = "{";
  bool first = true;
  for (auto i : indices()) {
    if (!first) out += ',';
    out += std::to_string(i);
    first = false;
  }
  out += '}';
  return out;
}

void PointSet::check_same_universe(const PointSet& other) const {
  if (universe_ != other.universe_) throw std::invalid_argument("PointSet: universe mismatch");
}

void PointSet::trim() {
  if (words_.empty()) return;
  auto tail = universe_ % kWordBits;
  if (tail != 0) words_.back() &= (std::uint64_t{1} << tail) - 1;
}

}  // namespace capacitylab
