#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "capacitylab/point_set.hpp"
#include "capacitylab/space.hpp"

namespace capacitylab {

namespace steprans {
class NormTower;
}
namespace potential {
struct Problem;
}

/// Properties a handle claims to have. The verify module checks them; nothing
/// else trusts them.
struct DeclaredProperties {
  bool monotone = true;
  bool subadditive = true;
  bool strongly_subadditive = false;
};

class SubmeasureHandle;

/// Structure a handle was built from, used by the property checks that need
/// more than the bare set function.
struct HandleContext {
  std::shared_ptr<const steprans::NormTower> tower;
  std::shared_ptr<const potential::Problem> potential;
  std::vector<SubmeasureHandle> join_components;
  std::optional<ProductTreeSpace> space;
};

/// Uniform evaluator interface c(A) over a finite universe of points.
///
/// Copies share the evaluator and the call counter. The evaluator must be
/// safe to call concurrently.
class SubmeasureHandle {
 public:
  using Evaluator = std::function<double(const PointSet&)>;

  SubmeasureHandle(std::string label, std::size_t universe, Evaluator evaluator,
                   DeclaredProperties declared = {}, HandleContext context = {});

  double operator()(const PointSet& A) const;

  const std::string& label() const { return label_; }
  std::size_t universe() const { return universe_; }
  const DeclaredProperties& declared() const { return declared_; }
  const HandleContext& context() const { return *context_; }
  std::size_t call_count() const { return calls_->load(); }

 private:
  std::string label_;
  std::size_t universe_;
  Evaluator evaluator_;
  DeclaredProperties declared_;
  std::shared_ptr<const HandleContext> context_;
  std::shared_ptr<std::atomic<std::size_t>> calls_;
};

/// Values of a handle on every subset of a universe of at most 20 points,
/// indexed by bitmask.
class CapacityTable {
 public:
  static constexpr std::size_t kMaxUniverse = 20;

  explicit CapacityTable(const SubmeasureHandle& handle);
  CapacityTable(std::size_t universe, std::vector<double> values);

  std::size_t universe() const { return universe_; }
  double operator[](std::uint64_t mask) const { return values_[mask]; }
  double operator()(const PointSet& A) const { return values_[A.to_mask()]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t universe_;
  std::vector<double> values_;
};

// Probability measure giving every point mass 1/universe.
SubmeasureHandle uniform_measure(std::size_t universe, std::string label = "uniform");

// Measure with the given nonnegative point weights.
SubmeasureHandle weighted_measure(std::vector<double> weights, std::string label = "measure");

// c(A) = 1 if point is in A, else 0.
SubmeasureHandle point_mass(std::size_t universe, std::size_t point, std::string label = "");

// Arbitrary table of 2^universe values indexed by bitmask. Nothing is
// assumed about the values; the declared properties are taken as given.
SubmeasureHandle table_submeasure(std::size_t universe, std::vector<double> values,
                                  std::string label = "table", DeclaredProperties declared = {});

}  // namespace capacitylab
