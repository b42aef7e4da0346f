#include "capacitylab/submeasure.hpp"

#include <stdexcept>

namespace capacitylab {

SubmeasureHandle::SubmeasureHandle(std::string label, std::size_t universe, Evaluator evaluator,
                                   DeclaredProperties declared, HandleContext context)
    : label_(std::move(label)),
      universe_(universe),
      evaluator_(std::move(evaluator)),
      declared_(declared),
      context_(std::make_shared<const HandleContext>(std::move(context))),
      calls_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (!evaluator_) throw std::invalid_argument("SubmeasureHandle: empty evaluator");
}

double SubmeasureHandle::operator()(const PointSet& A) const {
  if (A.universe() != universe_)
    throw std::invalid_argument("SubmeasureHandle '" + label_ + "': set has universe " +
                                std::to_string(A.universe()) + ", expected " + std::to_string(universe_));
  calls_->fetch_add(1, std::memory_order_relaxed);
  return evaluator_(A);
}

CapacityTable::CapacityTable(const SubmeasureHandle& handle) : universe_(handle.universe()) {
  if (universe_ > kMaxUniverse) throw std::invalid_argument("CapacityTable: universe larger than 20");
  const std::uint64_t n = std::uint64_t{1} << universe_;
  values_.resize(n);
  for (std::uint64_t mask = 0; mask < n; ++mask) values_[mask] = handle(PointSet::from_mask(universe_, mask));
}

CapacityTable::CapacityTable(std::size_t universe, std::vector<double> values)
    : universe_(universe), values_(std::move(values)) {
  if (universe_ > kMaxUniverse) throw std::invalid_argument("CapacityTable: universe larger than 20");
  if (values_.size() != (std::size_t{1} << universe_))
    throw std::invalid_argument("CapacityTable: expected 2^universe values");
}

SubmeasureHandle uniform_measure(std::size_t universe, std::string label) {
  if (universe == 0) throw std::invalid_argument("uniform_measure: empty universe");
  return weighted_measure(std::vector<double>(universe, 1.0 / static_cast<double>(universe)), std::move(label));
}

SubmeasureHandle weighted_measure(std::vector<double> weights, std::string label) {
  for (double w : weights)
    if (!(w >= 0.0)) throw std::invalid_argument("weighted_measure: negative weight");
  auto n = weights.size();
  DeclaredProperties declared{true, true, true};
  return SubmeasureHandle(
      std::move(label), n,
      [w = std::move(weights)](const PointSet& A) {
        double sum = 0.0;
        for (auto i : A.indices()) sum += w[i];
        return sum;
      },
      declared);
}

SubmeasureHandle point_mass(std::size_t universe, std::size_t point, std::string label) {
  if (point >= universe) throw std::invalid_argument("point_mass: point outside universe");
  if (label.empty()) label = "delta" + std::to_string(point);
  DeclaredProperties declared{true, true, true};
  return SubmeasureHandle(
      std::move(label), universe, [point](const PointSet& A) { return A.contains(point) ? 1.0 : 0.0; }, declared);
}

SubmeasureHandle table_submeasure(std::size_t universe, std::vector<double> values, std::string label,
                                  DeclaredProperties declared) {
  auto table = std::make_shared<const CapacityTable>(universe, std::move(values));
  return SubmeasureHandle(
      std::move(label), universe, [table](const PointSet& A) { return (*table)(A); }, declared);
}

}  // namespace capacitylab
