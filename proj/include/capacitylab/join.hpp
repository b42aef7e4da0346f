#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "capacitylab/point_set.hpp"
#include "capacitylab/submeasure.hpp"

namespace capacitylab::join {

enum class Method { exact, greedy };

std::string to_string(Method m);

/// b(A) with the partition that attains it. parts[m] is the set handed to
/// submeasure m; the parts are disjoint and their union is A.
struct JoinResult {
  double value = 0.0;
  std::vector<PointSet> parts;
  Method method = Method::exact;
};

constexpr std::size_t kMaxExactPoints = 20;
constexpr std::size_t kMaxExactParts = 4;

/// min over partitions A = A_0 u ... u A_{n-1} of sum c_m(A_m).
///
/// The infimum in the definition of the join runs over covers, but shrinking
/// each member of a cover to a partition never increases any c_m when the
/// c_m are monotone, so the minimum over partitions is the same number.
/// Branch and bound with the partial sum as lower bound. Throws UseGreedy
/// beyond kMaxExactPoints points or kMaxExactParts submeasures.
JoinResult join_exact(const std::vector<SubmeasureHandle>& submeasures, const PointSet& A);

/// Local search over single-point moves from seeded starting partitions.
/// An upper bound on join_exact; deterministic given the seed.
JoinResult join_greedy(const std::vector<SubmeasureHandle>& submeasures, const PointSet& A,
                       std::size_t iterations = 1000, std::uint64_t seed = 0);

/// A partition of A with c_m(A_m) = 0 for every m, if one exists.
std::optional<std::vector<PointSet>> null_decompose(const std::vector<SubmeasureHandle>& submeasures,
                                                    const PointSet& A);

struct UnionBoundVerdict {
  double lhs = 0.0;    // c(B u B_0 u ... ) - c(B)
  double bound = 0.0;  // sum of the epsilons
  bool passed = false;
};

/// Checks c(B u union B_i) - c(B) <= sum eps_i + 1e-9 given pairs (A_i, B_i)
/// with A_i inside B_i and B, and c(B_i) - c(A_i) <= eps_i. Throws
/// InvalidInstance when those preconditions fail.
UnionBoundVerdict union_bound_check(const SubmeasureHandle& c, const PointSet& B,
                                    const std::vector<std::pair<PointSet, PointSet>>& pairs,
                                    const std::vector<double>& epsilons);

// Handle evaluating join_exact; the components travel in its context.
SubmeasureHandle make_handle(std::vector<SubmeasureHandle> submeasures, std::string label = "join");

}  // namespace capacitylab::join
