#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "capacitylab/point_set.hpp"
#include "capacitylab/space.hpp"

namespace capacitylab::hausdorff {

/// A finite family of basic open sets used as a cover.
struct CoverFamily {
  std::vector<NodePath> opens;
  double s = 1.0;
  double max_diam = 1.0;  // delta
};

/// Sum of diam(O_t)^s = base^(s |t|) over the members.
///
/// Members are grouped by path length and the powers are summed from the
/// deepest level up, so two families with the same length histogram have
/// bit-identical weights.
double weight(const CoverFamily& E, const TreeMetric& metric);

// Same formula on a histogram: counts[len] members of path length len.
double histogram_weight(const std::vector<std::size_t>& counts, double base, double s);

/// O_t may be used at scale delta. Leaves are always admissible.
bool admissible(const ProductTreeSpace& space, const TreeMetric& metric, std::size_t length, double delta);

struct PremeasureResult {
  double value = 0.0;
  CoverFamily optimal_cover;
};

/// Exact minimum weight over covers of A by admissible basic opens, by
/// dynamic programming over the tree. The cover is listed in lexicographic
/// path order.
PremeasureResult min_weight_cover(const ProductTreeSpace& space, const TreeMetric& metric, const PointSet& A,
                                  double s, double delta);

/// min_weight_cover for each delta of a strictly decreasing sequence.
std::vector<PremeasureResult> premeasure_profile(const ProductTreeSpace& space, const TreeMetric& metric,
                                                 const PointSet& A, double s, const std::vector<double>& deltas);

// CSV with columns delta,value,cover_size.
void write_profile_csv(std::ostream& out, const std::vector<double>& deltas,
                       const std::vector<PremeasureResult>& profile);

}  // namespace capacitylab::hausdorff
