#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "capacitylab/point_set.hpp"
#include "capacitylab/space.hpp"
#include "capacitylab/submeasure.hpp"

namespace capacitylab::verify {

enum class Property {
  monotone,
  subadditive,
  strongly_subadditive,
  normalized,
  chain_continuity,
  ratio_claim,
  stability_biconditional,
  join_consistency,
  gamelemma,
};

std::string to_string(Property p);
std::optional<Property> property_from_string(std::string_view name);
std::vector<Property> all_properties();

enum class Mode { exhaustive, randomized };

std::string to_string(Mode m);

struct PropertySpec {
  Property name = Property::monotone;
  Mode mode = Mode::exhaustive;
  std::size_t trials = 1000;  // randomized mode
  std::uint64_t seed = 0;     // randomized mode
  double tolerance = 1e-9;
  // gamelemma only; empty selects {k/8 : 1 <= k <= 8}
  std::vector<double> epsilon_grid;
};

// pass and fail are definite; unknown is a randomized pass of a property that
// only an exhaustive scan can certify; skipped carries a reason.
enum class Verdict { pass, fail, skipped, unknown };

std::string to_string(Verdict v);

/// Operands of a violation and the values the check saw. relation names the
/// violated inequality.
struct Witness {
  std::string relation;
  std::vector<PointSet> operands;
  std::vector<double> values;
};

struct PropertyResult {
  PropertySpec spec;
  Verdict verdict = Verdict::skipped;
  std::optional<Witness> witness;
  std::string detail;
  std::uint64_t cases = 0;
  double max_deviation = 0.0;  // largest observed violation size, 0 when none
  double seconds = 0.0;
};

struct PropertyReport {
  std::string handle;
  std::vector<PropertyResult> results;  // in spec order
  double seconds = 0.0;

  std::size_t count(Verdict v) const;
  bool any_failed() const { return count(Verdict::fail) > 0; }

  // Deterministic part of the report. Timing goes under "timing" only when
  // requested.
  nlohmann::ordered_json to_json(bool include_timing = false) const;
  std::string to_table() const;
};

// Exhaustive scans enumerate at most 2^10 sets per operand.
constexpr std::size_t kMaxExhaustiveUniverse = 10;
constexpr std::size_t kMaxStabilityPoints = 8;

/// Runs each spec against the handle. The space defaults to the one in the
/// handle's context. Specs whose structure is missing or whose exhaustive
/// budget is exceeded are reported as skipped; the run continues.
PropertyReport run_suite(const SubmeasureHandle& handle, const std::vector<PropertySpec>& specs,
                         const std::optional<ProductTreeSpace>& space = std::nullopt);

/// Re-evaluates a failing result's witness through the handle and reports
/// whether the recorded violation is reproduced exactly.
bool reproduces(const SubmeasureHandle& handle, const PropertyResult& result,
                const std::optional<ProductTreeSpace>& space = std::nullopt);

}  // namespace capacitylab::verify
