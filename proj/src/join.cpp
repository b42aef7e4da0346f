#include "capacitylab/join.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "capacitylab/errors.hpp"
#include "capacitylab/parallel.hpp"

namespace capacitylab::join {

namespace {

constexpr double kNullTol = 1e-12;

void check_inputs(const std::vector<SubmeasureHandle>& cs, const PointSet& A, const char* who) {
  if (cs.empty()) throw std::invalid_argument(std::string(who) + ": at least one submeasure required");
  for (const auto& c : cs)
    if (c.universe() != A.universe())
      throw std::invalid_argument(std::string(who) + ": submeasure '" + c.label() + "' has a different universe");
}

std::vector<PointSet> empty_parts(std::size_t n, std::size_t universe) { return std::vector<PointSet>(n, PointSet(universe)); }

// Depth-first branch and bound below a fixed prefix of assignments.
struct Search {
  const std::vector<SubmeasureHandle>& cs;
  const std::vector<std::size_t>& points;
  std::vector<PointSet> parts;
  std::vector<double> costs;
  double best = std::numeric_limits<double>::infinity();
  std::vector<PointSet> best_parts;

  void run(std::size_t k, double partial) {
    // costs only grow as points are added (monotonicity), so partial bounds
    // every completion from below
    if (partial >= best) return;
    if (k == points.size()) {
      best = partial;
      best_parts = parts;
      return;
    }
    for (std::size_t m = 0; m < cs.size(); ++m) {
      parts[m].insert(points[k]);
      const double old = costs[m];
      costs[m] = cs[m](parts[m]);
      run(k + 1, partial - old + costs[m]);
      costs[m] = old;
      parts[m].erase(points[k]);
    }
  }
};

double total(const std::vector<SubmeasureHandle>& cs, const std::vector<PointSet>& parts) {
  double s = 0.0;
  for (std::size_t m = 0; m < cs.size(); ++m) s += cs[m](parts[m]);
  return s;
}

}  // namespace

std::string to_string(Method m) { return m == Method::exact ? "exact" : "greedy"; }

JoinResult join_exact(const std::vector<SubmeasureHandle>& cs, const PointSet& A) {
  check_inputs(cs, A, "join_exact");
  const auto points = A.indices();
  if (points.size() > kMaxExactPoints || cs.size() > kMaxExactParts)
    throw UseGreedy("join_exact: " + std::to_string(points.size()) + " points and " + std::to_string(cs.size()) +
                    " submeasures exceed the exact budget");
  JoinResult out;
  out.method = Method::exact;
  out.parts = empty_parts(cs.size(), A.universe());
  if (points.empty()) {
    out.value = total(cs, out.parts);
    return out;
  }

  // one independent search per choice for the first point; merged in
  // branch order so ties resolve the same way on every schedule
  std::vector<Search> branches;
  branches.reserve(cs.size());
  for (std::size_t m = 0; m < cs.size(); ++m) branches.push_back(Search{cs, points, {}, {}, std::numeric_limits<double>::infinity(), {}});
  parallel_for(cs.size(), [&](std::size_t m) {
    auto& s = branches[m];
    s.parts = empty_parts(cs.size(), A.universe());
    s.costs.resize(cs.size());
    for (std::size_t j = 0; j < cs.size(); ++j) s.costs[j] = cs[j](s.parts[j]);
    s.parts[m].insert(points[0]);
    s.costs[m] = cs[m](s.parts[m]);
    s.run(1, std::accumulate(s.costs.begin(), s.costs.end(), 0.0));
  });
  out.value = std::numeric_limits<double>::infinity();
  for (auto& s : branches)
    if (s.best < out.value) {
      out.value = s.best;
      out.parts = std::move(s.best_parts);
    }
  out.value = total(cs, out.parts);
  return out;
}

JoinResult join_greedy(const std::vector<SubmeasureHandle>& cs, const PointSet& A, std::size_t iterations,
                       std::uint64_t seed) {
  check_inputs(cs, A, "join_greedy");
  const auto points = A.indices();
  const std::size_t n = cs.size();
  JoinResult out;
  out.method = Method::greedy;
  out.parts = empty_parts(n, A.universe());
  out.value = total(cs, out.parts);
  if (points.empty()) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  constexpr std::size_t kRestarts = 8;

  auto local_search = [&](std::vector<std::size_t> assign, std::size_t& budget) {
    std::vector<PointSet> parts = empty_parts(n, A.universe());
    for (std::size_t k = 0; k < points.size(); ++k) parts[assign[k]].insert(points[k]);
    std::vector<double> costs(n);
    for (std::size_t m = 0; m < n; ++m) costs[m] = cs[m](parts[m]);
    bool improved = true;
    while (improved && budget > 0) {
      improved = false;
      --budget;
      for (std::size_t k = 0; k < points.size(); ++k) {
        const std::size_t from = assign[k];
        parts[from].erase(points[k]);
        const double from_cost = cs[from](parts[from]);
        std::size_t best_to = from;
        double best_gain = 1e-15;
        double best_to_cost = 0.0;
        for (std::size_t to = 0; to < n; ++to) {
          if (to == from) continue;
          parts[to].insert(points[k]);
          const double to_cost = cs[to](parts[to]);
          parts[to].erase(points[k]);
          const double gain = (costs[from] + costs[to]) - (from_cost + to_cost);
          if (gain > best_gain) {
            best_gain = gain;
            best_to = to;
            best_to_cost = to_cost;
          }
        }
        if (best_to == from) {
          parts[from].insert(points[k]);
          continue;
        }
        parts[best_to].insert(points[k]);
        costs[from] = from_cost;
        costs[best_to] = best_to_cost;
        assign[k] = best_to;
        improved = true;
      }
    }
    return std::make_pair(std::accumulate(costs.begin(), costs.end(), 0.0), std::move(parts));
  };

  std::size_t budget = std::max<std::size_t>(iterations, 1);
  out.value = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < kRestarts && budget > 0; ++r) {
    std::vector<std::size_t> assign(points.size());
    if (r == 0) {
      // everything to the submeasure that is cheapest on all of A
      std::size_t best_m = 0;
      double best_v = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < n; ++m)
        if (double v = cs[m](A); v < best_v) {
          best_v = v;
          best_m = m;
        }
      std::fill(assign.begin(), assign.end(), best_m);
    } else if (r == 1) {
      // each point to the submeasure that is cheapest on its singleton
      for (std::size_t k = 0; k < points.size(); ++k) {
        double best_v = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < n; ++m) {
          PointSet one(A.universe());
          one.insert(points[k]);
          if (double v = cs[m](one); v < best_v) {
            best_v = v;
            assign[k] = m;
          }
        }
      }
    } else {
      for (auto& a : assign) a = pick(rng);
    }
    auto [value, parts] = local_search(std::move(assign), budget);
    if (value < out.value) {
      out.value = value;
      out.parts = std::move(parts);
    }
  }
  out.value = total(cs, out.parts);
  return out;
}

std::optional<std::vector<PointSet>> null_decompose(const std::vector<SubmeasureHandle>& cs, const PointSet& A) {
  check_inputs(cs, A, "null_decompose");
  const auto points = A.indices();
  if (points.size() > kMaxExactPoints || cs.size() > kMaxExactParts)
    throw UseGreedy("null_decompose: instance exceeds the exact budget");
  std::vector<PointSet> parts = empty_parts(cs.size(), A.universe());
  for (std::size_t m = 0; m < cs.size(); ++m)
    if (cs[m](parts[m]) > kNullTol) return std::nullopt;

  // every part must stay null; a point goes only where it keeps its part null
  auto search = [&](auto&& self, std::size_t k) -> bool {
    if (k == points.size()) return true;
    for (std::size_t m = 0; m < cs.size(); ++m) {
      parts[m].insert(points[k]);
      if (cs[m](parts[m]) <= kNullTol && self(self, k + 1)) return true;
      parts[m].erase(points[k]);
    }
    return false;
  };
  if (!search(search, 0)) return std::nullopt;
  return parts;
}

UnionBoundVerdict union_bound_check(const SubmeasureHandle& c, const PointSet& B,
                                    const std::vector<std::pair<PointSet, PointSet>>& pairs,
                                    const std::vector<double>& epsilons) {
  if (pairs.size() != epsilons.size()) throw InvalidInstance("union_bound_check: one epsilon per pair expected");
  if (B.universe() != c.universe()) throw InvalidInstance("union_bound_check: B has the wrong universe");
  UnionBoundVerdict v;
  PointSet all = B;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [Ai, Bi] = pairs[i];
    const std::string tag = "union_bound_check: pair " + std::to_string(i);
    if (Ai.universe() != c.universe() || Bi.universe() != c.universe()) throw InvalidInstance(tag + " has the wrong universe");
    if (!(epsilons[i] >= 0.0)) throw InvalidInstance(tag + " has a negative epsilon");
    if (!Ai.is_subset_of(Bi & B)) throw InvalidInstance(tag + ": A_i is not inside B_i and B");
    if (c(Bi) - c(Ai) > epsilons[i] + 1e-12) throw InvalidInstance(tag + ": c(B_i) - c(A_i) exceeds epsilon");
    all |= Bi;
    v.bound += epsilons[i];
  }
  v.lhs = c(all) - c(B);
  v.passed = v.lhs <= v.bound + 1e-9;
  return v;
}

SubmeasureHandle make_handle(std::vector<SubmeasureHandle> submeasures, std::string label) {
  if (submeasures.empty()) throw std::invalid_argument("join make_handle: no components");
  const std::size_t universe = submeasures.front().universe();
  DeclaredProperties declared{true, true, false};
  HandleContext ctx;
  ctx.join_components = submeasures;
  return SubmeasureHandle(
      std::move(label), universe,
      [cs = std::move(submeasures)](const PointSet& A) { return join_exact(cs, A).value; }, declared,
      std::move(ctx));
}

}  // namespace capacitylab::join
