#include "capacitylab/hausdorff.hpp"

#include <cmath>
#include <stdexcept>

#include "capacitylab/format.hpp"

namespace capacitylab::hausdorff {

namespace {

void check_s(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("hausdorff: s must be a positive real");
}

}  // namespace

double histogram_weight(const std::vector<std::size_t>& counts, double base, double s) {
  double w = 0.0;
  for (std::size_t len = counts.size(); len-- > 0;)
    if (counts[len]) w += static_cast<double>(counts[len]) * std::pow(base, s * static_cast<double>(len));
  return w;
}

double weight(const CoverFamily& E, const TreeMetric& metric) {
  metric.validate();
  std::vector<std::size_t> counts;
  for (const auto& t : E.opens) {
    if (counts.size() <= t.size()) counts.resize(t.size() + 1, 0);
    ++counts[t.size()];
  }
  return histogram_weight(counts, metric.base, E.s);
}

bool admissible(const ProductTreeSpace& space, const TreeMetric& metric, std::size_t length, double delta) {
  return length >= space.depth() || metric.diameter_at_length(length) <= delta;
}

PremeasureResult min_weight_cover(const ProductTreeSpace& space, const TreeMetric& metric, const PointSet& A,
                                  double s, double delta) {
  check_s(s);
  metric.validate();
  if (A.universe() != space.leaf_count()) throw std::invalid_argument("min_weight_cover: A is not a set of leaves");
  const std::size_t d = space.depth();

  PremeasureResult out;
  out.optimal_cover.s = s;
  out.optimal_cover.max_diam = delta;

  // hist[r] is the length histogram of the best cover of A inside node r of
  // the current level; use_self[len][r] records whether that cover is O_t itself.
  std::vector<std::vector<std::size_t>> hist(space.leaf_count(), std::vector<std::size_t>(d + 1, 0));
  std::vector<std::vector<char>> use_self(d + 1);
  std::vector<char> hit(space.leaf_count(), 0);
  use_self[d].assign(space.leaf_count(), 0);
  for (auto i : A.indices()) {
    hit[i] = 1;
    hist[i][d] = 1;
    use_self[d][i] = 1;
  }

  std::vector<std::size_t> single(d + 1, 0);
  for (std::size_t len = d; len-- > 0;) {
    const std::size_t k = space.arity(len);
    const std::size_t nodes = space.nodes_at_length(len);
    const bool ok = admissible(space, metric, len, delta);
    use_self[len].assign(nodes, 0);
    for (std::size_t r = 0; r < nodes; ++r) {
      std::vector<std::size_t> sum(d + 1, 0);
      char any = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const std::size_t child = r * k + c;
        any |= hit[child];
        for (std::size_t j = 0; j <= d; ++j) sum[j] += hist[child][j];
      }
      hit[r] = any;
      if (any && ok) {
        single.assign(d + 1, 0);
        single[len] = 1;
        // ties go to the coarser cover
        if (histogram_weight(single, metric.base, s) <= histogram_weight(sum, metric.base, s)) {
          sum = single;
          use_self[len][r] = 1;
        }
      }
      hist[r] = std::move(sum);
    }
    hit.resize(nodes);
    hist.resize(nodes);
  }

  // walk down from the root collecting chosen nodes in lexicographic order
  auto collect = [&](auto&& self, std::size_t len, std::size_t rank) -> void {
    auto [first, last] = space.leaf_range(space.node_at(len, rank));
    bool any = false;
    for (std::size_t i = first; i < last && !any; ++i) any = A.contains(i);
    if (!any) return;
    if (use_self[len][rank]) {
      out.optimal_cover.opens.push_back(space.node_at(len, rank));
      return;
    }
    for (std::size_t c = 0; c < space.arity(len); ++c) self(self, len + 1, rank * space.arity(len) + c);
  };
  collect(collect, 0, 0);
  out.value = weight(out.optimal_cover, metric);
  return out;
}

std::vector<PremeasureResult> premeasure_profile(const ProductTreeSpace& space, const TreeMetric& metric,
                                                 const PointSet& A, double s, const std::vector<double>& deltas) {
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (!(deltas[i] < deltas[i - 1])) throw std::invalid_argument("premeasure_profile: deltas must strictly decrease");
  std::vector<PremeasureResult> out;
  out.reserve(deltas.size());
  for (double delta : deltas) out.push_back(min_weight_cover(space, metric, A, s, delta));
  return out;
}

void write_profile_csv(std::ostream& out, const std::vector<double>& deltas,
                       const std::vector<PremeasureResult>& profile) {
  if (deltas.size() != profile.size()) throw std::invalid_argument("write_profile_csv: size mismatch");
  out << "delta,value,cover_size\n";
  for (std::size_t i = 0; i < deltas.size(); ++i)
    out << format_report_real(deltas[i]) << ',' << format_report_real(profile[i].value) << ','
        << profile[i].optimal_cover.opens.size() << '\n';
}

}  // namespace capacitylab::hausdorff
