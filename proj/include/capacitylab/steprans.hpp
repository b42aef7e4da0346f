#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "capacitylab/point_set.hpp"
#include "capacitylab/space.hpp"
#include "capacitylab/submeasure.hpp"

namespace capacitylab::steprans {

using Rational = boost::multiprecision::cpp_rational;

// Parses "p/q" or an integer into an exact rational.
Rational parse_exact_rational(std::string_view text);

/// A good norm on a finite set {0, ..., size-1}: monotone in |f|, positively
/// homogeneous, subadditive, and equal to 1 on the constant-one function.
class GoodNorm {
 public:
  struct WeightedP {
    std::vector<double> weights;
    double p = 1.0;  // +inf selects the weighted sup norm
    std::optional<std::vector<Rational>> exact_weights;
  };
  struct Max {
    std::size_t size = 0;
  };
  // Values on indicator vectors, extended to all functions by the Choquet
  // integral of |f|. Subadditive iff the table is submodular.
  struct ExplicitTable {
    std::size_t size = 0;
    std::vector<double> values;  // indexed by bitmask
  };
  // (outer * inner)(f) = outer(x -> inner(y -> f(x, y))), f indexed x*|Y| + y.
  struct Iterated {
    std::shared_ptr<const GoodNorm> outer;
    std::shared_ptr<const GoodNorm> inner;
  };

  static GoodNorm weighted_p(std::vector<double> weights, double p);
  // p = 1 with rational weights; enables exact evaluation.
  static GoodNorm weighted_exact(std::vector<Rational> weights);
  static GoodNorm uniform(std::size_t size, double p = 1.0);
  static GoodNorm max(std::size_t size);
  static GoodNorm table(std::size_t size, std::vector<double> values);

  std::size_t size() const;
  double operator()(std::span<const double> f) const;

  // n(f) <= n(g) with f != g, 0 <= f <= g forces n(f) < n(g): true for
  // weighted p-norms (p finite) with every weight positive.
  bool strictly_monotone() const;

  bool has_exact() const;
  Rational exact(std::span<const Rational> f) const;

  // Config syntax: "max", "wp p=<real> w=<list>", "table v=<list>".
  std::string describe() const;

  const auto& variant() const { return v_; }

 private:
  explicit GoodNorm(std::variant<WeightedP, Max, ExplicitTable, Iterated> v) : v_(std::move(v)) {}
  std::variant<WeightedP, Max, ExplicitTable, Iterated> v_;

  friend GoodNorm iterate(const GoodNorm& n, const GoodNorm& m);
};

/// The iterated norm n*m on X x Y.
GoodNorm iterate(const GoodNorm& n, const GoodNorm& m);

/// Randomized check of the good-norm axioms; returns a description of the
/// first violation, or nullopt.
std::optional<std::string> check_good_norm(const GoodNorm& n, std::size_t trials, std::uint64_t seed,
                                           double tol = 1e-12);

/// Per-level good norms n_0, ..., n_{d-1} on a finite product tree.
class NormTower {
 public:
  NormTower(ProductTreeSpace space, std::vector<GoodNorm> levels);

  const ProductTreeSpace& space() const { return space_; }
  const std::vector<GoodNorm>& levels() const { return levels_; }
  const GoodNorm& level(std::size_t i) const { return levels_.at(i); }

  bool strictly_monotone() const;
  bool has_exact() const;

  // m_j = n_0 * ... * n_j as an explicit GoodNorm.
  GoodNorm partial_iterate(std::size_t j) const;

  // Bottom-up evaluation. values[len][rank] is k_t(f|O_t) for the node t of
  // the given length and rank; values[0][0] is k(f).
  std::vector<std::vector<double>> node_values(std::span<const double> leaf_values) const;

  // c(O_t) for every node, same layout as node_values.
  const std::vector<std::vector<double>>& cell_capacities() const { return cell_capacity_; }

 private:
  ProductTreeSpace space_;
  std::vector<GoodNorm> levels_;
  std::vector<std::vector<double>> cell_capacity_;
};

/// c(A) = k(chi_A) for the finite-depth limit norm k of a tower.
struct DerivedCapacity {
  std::shared_ptr<const NormTower> tower;
};

/// m_j(f*) where f is given on the prefixes of length j+1 in lexicographic order.
double eval_step(const NormTower& tower, std::span<const double> f, std::size_t j);

double capacity(const DerivedCapacity& cap, const PointSet& A);
double capacity(const NormTower& tower, const PointSet& A);

// Exact value; requires every level to be Max or rational WeightedP with p = 1.
Rational capacity_exact(const NormTower& tower, const PointSet& A);

/// k_t(f) for f given on the leaves. Throws SupportViolation if f is nonzero
/// outside O_t.
double relative_norm(const NormTower& tower, const NodePath& t, std::span<const double> f);

/// |k_t(f) - k(f)/k(O_t)| <= 1e-9. Throws DegenerateCell when k(O_t) = 0.
bool check_ratio_claim(const NormTower& tower, const NodePath& t, std::span<const double> f);

/// Leaves x such that c(A cap O_{x|n}) > (1 - epsilon) c(O_{x|n}) for some n <= d.
PointSet density_set(const DerivedCapacity& cap, const PointSet& A, double epsilon);

struct TildeResult {
  PointSet set;  // A union the intersection of A_eps over the grid
  // A union {x : some prefix t of x has c(O_t) > 0 and c(A cap O_t) = c(O_t)};
  // the intersection over all eps > 0, available exactly at finite depth.
  PointSet limit;
  // Index of the first grid entry from which the running intersection never
  // changes again.
  std::size_t stable_from = 0;
  bool matches_limit = false;
};

std::vector<double> default_epsilon_grid();

TildeResult tilde_steprans(const DerivedCapacity& cap, const PointSet& A, std::span<const double> epsilon_grid);

struct StrongSubadditivityWitness {
  PointSet A;
  PointSet B;
  double lhs = 0.0;  // c(A u B) + c(A n B)
  double rhs = 0.0;  // c(A) + c(B)
};

struct StrongSubadditivitySearch {
  std::optional<StrongSubadditivityWitness> witness;
  std::uint64_t pairs_scanned = 0;
  bool exhausted = false;  // every unordered pair was examined
};

/// Scans unordered pairs of subsets for c(AuB)+c(AnB) > c(A)+c(B)+1e-9.
/// Exhaustive when the space has at most 16 leaves and max_pairs suffices.
StrongSubadditivitySearch strong_subadd_search(const DerivedCapacity& cap, std::uint64_t max_pairs);
StrongSubadditivitySearch strong_subadd_search(const CapacityTable& table, std::uint64_t max_pairs);

SubmeasureHandle make_handle(std::shared_ptr<const NormTower> tower, std::string label = "tower");

}  // namespace capacitylab::steprans
