#include "capacitylab/steprans.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "capacitylab/errors.hpp"
#include "capacitylab/format.hpp"

namespace capacitylab::steprans {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kWeightSumTol = 1e-12;

double weighted_p_value(const GoodNorm::WeightedP& w, std::span<const double> f) {
  if (std::isinf(w.p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (w.weights[i] > 0.0) m = std::max(m, std::abs(f[i]));
    return m;
  }
  if (w.p == 1.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w.weights[i] * std::abs(f[i]);
    return s;
  }
  // scale by the sup to keep |f|^p in range
  double scale = 0.0;
  for (double v : f) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w.weights[i] * std::pow(std::abs(f[i]) / scale, w.p);
  return scale * std::pow(s, 1.0 / w.p);
}

double choquet_value(const GoodNorm::ExplicitTable& t, std::span<const double> f) {
  std::vector<std::size_t> order(f.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(f[a]) > std::abs(f[b]); });
  double total = 0.0;
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    mask |= std::uint64_t{1} << order[i];
    double hi = std::abs(f[order[i]]);
    double lo = i + 1 < order.size() ? std::abs(f[order[i + 1]]) : 0.0;
    total += (hi - lo) * t.values[mask];
  }
  return total;
}

std::string join_reals(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_real(v[i]);
  }
  return out;
}

// Reduces values on the nodes of length `from` inside one aligned block down
// to nodes of length `to`, applying level norms bottom-up.
std::vector<double> collapse(const NormTower& tower, std::vector<double> values, std::size_t from, std::size_t to) {
  for (std::size_t len = from; len-- > to;) {
    const auto& norm = tower.level(len);
    const std::size_t k = tower.space().arity(len);
    std::vector<double> next(values.size() / k);
    for (std::size_t r = 0; r < next.size(); ++r) next[r] = norm(std::span<const double>(values).subspan(r * k, k));
    values = std::move(next);
  }
  return values;
}

}  // namespace

Rational parse_exact_rational(std::string_view text) {
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t'; }), s.end());
  if (s.empty()) throw std::invalid_argument("empty rational");
  auto check_int = [](const std::string& part) {
    std::size_t start = (!part.empty() && (part[0] == '-' || part[0] == '+')) ? 1 : 0;
    if (part.size() == start) return false;
    return std::all_of(part.begin() + static_cast<std::ptrdiff_t>(start), part.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
  };
  auto slash = s.find('/');
  std::string num = slash == std::string::npos ? s : s.substr(0, slash);
  std::string den = slash == std::string::npos ? "1" : s.substr(slash + 1);
  if (!check_int(num) || !check_int(den)) throw std::invalid_argument("not an exact rational: '" + s + "'");
  boost::multiprecision::cpp_int n(num), d(den);
  if (d == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
  return Rational(n, d);
}

GoodNorm GoodNorm::weighted_p(std::vector<double> weights, double p) {
  if (weights.empty()) throw std::invalid_argument("weighted_p: no weights");
  if (!(p >= 1.0)) throw std::invalid_argument("weighted_p: exponent must be >= 1");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weighted_p: weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTol) throw std::invalid_argument("weighted_p: weights must sum to 1");
  return GoodNorm(WeightedP{std::move(weights), p, std::nullopt});
}

GoodNorm GoodNorm::weighted_exact(std::vector<Rational> weights) {
  if (weights.empty()) throw std::invalid_argument("weighted_exact: no weights");
  Rational sum = 0;
  std::vector<double> approx;
  for (const auto& w : weights) {
    if (w < 0) throw std::invalid_argument("weighted_exact: weights must be nonnegative");
    sum += w;
    approx.push_back(static_cast<double>(w));
  }
  if (sum != 1) throw std::invalid_argument("weighted_exact: weights must sum to exactly 1");
  return GoodNorm(WeightedP{std::move(approx), 1.0, std::move(weights)});
}

GoodNorm GoodNorm::uniform(std::size_t size, double p) {
  if (size == 0) throw std::invalid_argument("uniform: empty set");
  std::vector<Rational> w(size, Rational(1, static_cast<long long>(size)));
  if (p == 1.0) return weighted_exact(std::move(w));
  return weighted_p(std::vector<double>(size, 1.0 / static_cast<double>(size)), p);
}

GoodNorm GoodNorm::max(std::size_t size) {
  if (size == 0) throw std::invalid_argument("max: empty set");
  return GoodNorm(Max{size});
}

GoodNorm GoodNorm::table(std::size_t size, std::vector<double> values) {
  if (size == 0 || size > 16) throw std::invalid_argument("table: size must be in 1..16");
  if (values.size() != (std::size_t{1} << size)) throw std::invalid_argument("table: expected 2^size values");
  if (values.front() != 0.0) throw std::invalid_argument("table: value on the empty set must be 0");
  if (std::abs(values.back() - 1.0) > kWeightSumTol) throw std::invalid_argument("table: value on the full set must be 1");
  for (std::uint64_t mask = 0; mask < values.size(); ++mask)
    for (std::size_t i = 0; i < size; ++i)
      if (values[mask | (std::uint64_t{1} << i)] < values[mask])
        throw std::invalid_argument("table: values must be monotone");
  return GoodNorm(ExplicitTable{size, std::move(values)});
}

std::size_t GoodNorm::size() const {
  return std::visit(overloaded{[](const WeightedP& w) { return w.weights.size(); },
                               [](const Max& m) { return m.size; },
                               [](const ExplicitTable& t) { return t.size; },
                               [](const Iterated& it) { return it.outer->size() * it.inner->size(); }},
                    v_);
}

double GoodNorm::operator()(std::span<const double> f) const {
  if (f.size() != size()) throw std::invalid_argument("GoodNorm: function has the wrong length");
  return std::visit(overloaded{[&](const WeightedP& w) { return weighted_p_value(w, f); },
                               [&](const Max&) {
                                 double m = 0.0;
                                 for (double v : f) m = std::max(m, std::abs(v));
                                 return m;
                               },
                               [&](const ExplicitTable& t) { return choquet_value(t, f); },
                               [&](const Iterated& it) {
                                 const std::size_t k = it.inner->size();
                                 std::vector<double> rows(it.outer->size());
                                 for (std::size_t x = 0; x < rows.size(); ++x) rows[x] = (*it.inner)(f.subspan(x * k, k));
                                 return (*it.outer)(rows);
                               }},
                    v_);
}

bool GoodNorm::strictly_monotone() const {
  return std::visit(overloaded{[](const WeightedP& w) {
                                 return std::isfinite(w.p) &&
                                        std::all_of(w.weights.begin(), w.weights.end(), [](double x) { return x > 0.0; });
                               },
                               [](const Max& m) { return m.size == 1; },
                               [](const ExplicitTable& t) {
                                 for (std::uint64_t mask = 0; mask < t.values.size(); ++mask)
                                   for (std::size_t i = 0; i < t.size; ++i) {
                                     auto bit = std::uint64_t{1} << i;
                                     if (!(mask & bit) && !(t.values[mask | bit] > t.values[mask])) return false;
                                   }
                                 return true;
                               },
                               [](const Iterated& it) { return it.outer->strictly_monotone() && it.inner->strictly_monotone(); }},
                    v_);
}

bool GoodNorm::has_exact() const {
  return std::visit(overloaded{[](const WeightedP& w) { return w.exact_weights.has_value(); },
                               [](const Max&) { return true; },
                               [](const ExplicitTable&) { return false; },
                               [](const Iterated& it) { return it.outer->has_exact() && it.inner->has_exact(); }},
                    v_);
}

Rational GoodNorm::exact(std::span<const Rational> f) const {
  if (f.size() != size()) throw std::invalid_argument("GoodNorm::exact: function has the wrong length");
  return std::visit(overloaded{[&](const WeightedP& w) -> Rational {
                                 if (!w.exact_weights) throw std::logic_error("GoodNorm::exact: no exact weights");
                                 Rational s = 0;
                                 for (std::size_t i = 0; i < f.size(); ++i) s += (*w.exact_weights)[i] * abs(f[i]);
                                 return s;
                               },
                               [&](const Max&) -> Rational {
                                 Rational m = 0;
                                 for (const auto& v : f) m = std::max(m, Rational(abs(v)));
                                 return m;
                               },
                               [&](const ExplicitTable&) -> Rational {
                                 throw std::logic_error("GoodNorm::exact: table norms are not exact");
                               },
                               [&](const Iterated& it) -> Rational {
                                 const std::size_t k = it.inner->size();
                                 std::vector<Rational> rows(it.outer->size());
                                 for (std::size_t x = 0; x < rows.size(); ++x) rows[x] = it.inner->exact(f.subspan(x * k, k));
                                 return it.outer->exact(rows);
                               }},
                    v_);
}

std::string GoodNorm::describe() const {
  return std::visit(overloaded{[](const WeightedP& w) {
                                 std::string out = "wp p=" + (std::isinf(w.p) ? std::string("inf") : format_real(w.p)) + " w=";
                                 if (w.exact_weights) {
                                   for (std::size_t i = 0; i < w.exact_weights->size(); ++i) {
                                     if (i) out += ',';
                                     out += (*w.exact_weights)[i].str();
                                   }
                                 } else {
                                   out += join_reals(w.weights);
                                 }
                                 return out;
                               },
                               [](const Max&) { return std::string("max"); },
                               [](const ExplicitTable& t) { return "table v=" + join_reals(t.values); },
                               [](const Iterated& it) { return "(" + it.outer->describe() + ")*(" + it.inner->describe() + ")"; }},
                    v_);
}

GoodNorm iterate(const GoodNorm& n, const GoodNorm& m) {
  return GoodNorm(GoodNorm::Iterated{std::make_shared<const GoodNorm>(n), std::make_shared<const GoodNorm>(m)});
}

std::optional<std::string> check_good_norm(const GoodNorm& n, std::size_t trials, std::uint64_t seed, double tol) {
  const std::size_t k = n.size();
  std::vector<double> ones(k, 1.0);
  if (std::abs(n(ones) - 1.0) > tol) return "n(1) = " + format_real(n(ones)) + " != 1";

  bool pointwise_strict = std::visit(overloaded{[](const GoodNorm::WeightedP& w) {
                                                  return std::all_of(w.weights.begin(), w.weights.end(),
                                                                     [](double x) { return x > 0.0; });
                                                },
                                                [](const GoodNorm::Max&) { return true; },
                                                [](const auto&) { return false; }},
                                     n.variant());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> grow(1.0, 2.0);
  std::vector<double> f(k), g(k), h(k);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (std::size_t i = 0; i < k; ++i) {
      f[i] = unit(rng);
      g[i] = unit(rng);
    }
    double nf = n(f), ng = n(g);
    if (nf < 0.0) return "negative value";
    for (std::size_t i = 0; i < k; ++i) h[i] = f[i] + g[i];
    if (n(h) > nf + ng + tol * (1.0 + nf + ng)) return "triangle inequality fails";
    double lambda = unit(rng) * 3.0;
    for (std::size_t i = 0; i < k; ++i) h[i] = lambda * f[i];
    if (std::abs(n(h) - std::abs(lambda) * nf) > tol * (1.0 + nf)) return "not positively homogeneous";
    // |f| <= |h| pointwise
    for (std::size_t i = 0; i < k; ++i) h[i] = -f[i] * (trial % 2 ? grow(rng) : 1.0);
    if (nf > n(h) + tol * (1.0 + nf)) return "does not respect the absolute value";
    if (pointwise_strict) {
      for (std::size_t i = 0; i < k; ++i) h[i] = std::abs(f[i]) * grow(rng) + 1e-3;
      if (!(nf < n(h))) return "pointwise strict increase not reflected";
    }
  }
  return std::nullopt;
}

NormTower::NormTower(ProductTreeSpace space, std::vector<GoodNorm> levels)
    : space_(std::move(space)), levels_(std::move(levels)) {
  if (levels_.size() != space_.depth())
    throw std::invalid_argument("NormTower: need one norm per level (" + std::to_string(space_.depth()) + ")");
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i].size() != space_.arity(i))
      throw std::invalid_argument("NormTower: level " + std::to_string(i) + " norm has the wrong size");

  // c(O_t) = c(O_parent) * n_{|t|-1}(e_{last}) by homogeneity of the outer norms.
  cell_capacity_.resize(space_.depth() + 1);
  cell_capacity_[0] = {1.0};
  for (std::size_t len = 0; len < space_.depth(); ++len) {
    const std::size_t k = space_.arity(len);
    std::vector<double> unit_values(k);
    for (std::size_t y = 0; y < k; ++y) {
      std::vector<double> e(k, 0.0);
      e[y] = 1.0;
      unit_values[y] = levels_[len](e);
    }
    auto& next = cell_capacity_[len + 1];
    next.resize(cell_capacity_[len].size() * k);
    for (std::size_t r = 0; r < cell_capacity_[len].size(); ++r)
      for (std::size_t y = 0; y < k; ++y) next[r * k + y] = cell_capacity_[len][r] * unit_values[y];
  }
}

bool NormTower::strictly_monotone() const {
  return std::all_of(levels_.begin(), levels_.end(), [](const GoodNorm& n) { return n.strictly_monotone(); });
}

bool NormTower::has_exact() const {
  return std::all_of(levels_.begin(), levels_.end(), [](const GoodNorm& n) { return n.has_exact(); });
}

GoodNorm NormTower::partial_iterate(std::size_t j) const {
  if (j >= levels_.size()) throw std::out_of_range("partial_iterate: level out of range");
  GoodNorm m = levels_[0];
  for (std::size_t i = 1; i <= j; ++i) m = iterate(m, levels_[i]);
  return m;
}

std::vector<std::vector<double>> NormTower::node_values(std::span<const double> leaf_values) const {
  if (leaf_values.size() != space_.leaf_count()) throw std::invalid_argument("node_values: wrong number of leaf values");
  std::vector<std::vector<double>> values(space_.depth() + 1);
  values[space_.depth()].assign(leaf_values.begin(), leaf_values.end());
  for (std::size_t len = space_.depth(); len-- > 0;) values[len] = collapse(*this, values[len + 1], len + 1, len);
  return values;
}

double eval_step(const NormTower& tower, std::span<const double> f, std::size_t j) {
  const auto& space = tower.space();
  if (j >= space.depth()) throw std::invalid_argument("eval_step: level out of range");
  if (f.size() != space.nodes_at_length(j + 1))
    throw std::invalid_argument("eval_step: f must be given on every prefix of length j+1");
  return collapse(tower, std::vector<double>(f.begin(), f.end()), j + 1, 0).front();
}

double capacity(const NormTower& tower, const PointSet& A) {
  if (A.universe() != tower.space().leaf_count()) throw std::invalid_argument("capacity: set is not over the tower's space");
  std::vector<double> chi(A.universe(), 0.0);
  for (auto i : A.indices()) chi[i] = 1.0;
  return collapse(tower, std::move(chi), tower.space().depth(), 0).front();
}

double capacity(const DerivedCapacity& cap, const PointSet& A) { return capacity(*cap.tower, A); }

Rational capacity_exact(const NormTower& tower, const PointSet& A) {
  if (!tower.has_exact()) throw std::invalid_argument("capacity_exact: tower has a level without exact arithmetic");
  if (A.universe() != tower.space().leaf_count()) throw std::invalid_argument("capacity_exact: set is not over the tower's space");
  std::vector<Rational> values(A.universe(), Rational(0));
  for (auto i : A.indices()) values[i] = 1;
  for (std::size_t len = tower.space().depth(); len-- > 0;) {
    const std::size_t k = tower.space().arity(len);
    std::vector<Rational> next(values.size() / k);
    for (std::size_t r = 0; r < next.size(); ++r)
      next[r] = tower.level(len).exact(std::span<const Rational>(values).subspan(r * k, k));
    values = std::move(next);
  }
  return values.front();
}

double relative_norm(const NormTower& tower, const NodePath& t, std::span<const double> f) {
  const auto& space = tower.space();
  if (f.size() != space.leaf_count()) throw std::invalid_argument("relative_norm: f must be given on every leaf");
  auto [first, last] = space.leaf_range(t);
  for (std::size_t i = 0; i < f.size(); ++i)
    if ((i < first || i >= last) && f[i] != 0.0)
      throw SupportViolation("relative_norm: f is nonzero outside O_" + to_string(t));
  std::vector<double> block(f.begin() + static_cast<std::ptrdiff_t>(first), f.begin() + static_cast<std::ptrdiff_t>(last));
  return collapse(tower, std::move(block), space.depth(), t.size()).front();
}

bool check_ratio_claim(const NormTower& tower, const NodePath& t, std::span<const double> f) {
  const double cell = capacity(tower, basic_open(tower.space(), t));
  if (cell == 0.0) throw DegenerateCell("check_ratio_claim: k(O_" + to_string(t) + ") = 0");
  const double kt = relative_norm(tower, t, f);
  const double k = collapse(tower, std::vector<double>(f.begin(), f.end()), tower.space().depth(), 0).front();
  return std::abs(kt - k / cell) <= 1e-9;
}

PointSet density_set(const DerivedCapacity& cap, const PointSet& A, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("density_set: epsilon must lie in (0,1)");
  const auto& tower = *cap.tower;
  const auto& space = tower.space();
  std::vector<double> chi(space.leaf_count(), 0.0);
  for (auto i : A.indices()) chi[i] = 1.0;
  const auto relative = tower.node_values(chi);
  const auto& cells = tower.cell_capacities();

  PointSet out(space.leaf_count());
  for (std::size_t len = 0; len <= space.depth(); ++len) {
    const std::size_t block = space.block_size(len);
    for (std::size_t r = 0; r < relative[len].size(); ++r) {
      // c(A cap O_t) = k_t(chi_A) * c(O_t)
      const double inside = relative[len][r] * cells[len][r];
      if (inside > (1.0 - epsilon) * cells[len][r])
        for (std::size_t i = r * block; i < (r + 1) * block; ++i) out.insert(i);
    }
  }
  return out;
}

std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  for (int k = 1; k <= 10; ++k) grid.push_back(std::ldexp(1.0, -k));
  return grid;
}

TildeResult tilde_steprans(const DerivedCapacity& cap, const PointSet& A, std::span<const double> epsilon_grid) {
  if (epsilon_grid.empty()) throw std::invalid_argument("tilde_steprans: empty epsilon grid");
  const auto& tower = *cap.tower;
  const auto& space = tower.space();

  std::vector<PointSet> running;
  running.reserve(epsilon_grid.size());
  for (double eps : epsilon_grid) {
    auto dense = density_set(cap, A, eps);
    running.push_back(running.empty() ? dense : running.back() & dense);
  }
  TildeResult result{A | running.back(), PointSet(space.leaf_count()), 0, false};
  std::size_t k = running.size() - 1;
  while (k > 0 && running[k - 1] == running.back()) --k;
  result.stable_from = k;

  std::vector<double> chi(space.leaf_count(), 0.0);
  for (auto i : A.indices()) chi[i] = 1.0;
  const auto relative = tower.node_values(chi);
  const auto& cells = tower.cell_capacities();
  result.limit = A;
  for (std::size_t len = 0; len <= space.depth(); ++len) {
    const std::size_t block = space.block_size(len);
    for (std::size_t r = 0; r < relative[len].size(); ++r)
      if (cells[len][r] > 0.0 && relative[len][r] >= 1.0 - 1e-12)
        for (std::size_t i = r * block; i < (r + 1) * block; ++i) result.limit.insert(i);
  }
  result.matches_limit = result.limit == result.set;
  return result;
}

StrongSubadditivitySearch strong_subadd_search(const CapacityTable& table, std::uint64_t max_pairs) {
  StrongSubadditivitySearch out;
  const std::size_t n = table.universe();
  if (n > 16) throw TooLarge("strong_subadd_search: exhaustive mode needs at most 16 points");
  const std::uint64_t sets = std::uint64_t{1} << n;
  for (std::uint64_t a = 0; a < sets; ++a) {
    for (std::uint64_t b = a + 1; b < sets; ++b) {
      if (out.pairs_scanned == max_pairs) return out;
      ++out.pairs_scanned;
      if ((a & b) == a || (a & b) == b) continue;  // comparable pairs are equalities
      const double lhs = table[a | b] + table[a & b];
      const double rhs = table[a] + table[b];
      if (lhs > rhs + 1e-9) {
        out.witness = StrongSubadditivityWitness{PointSet::from_mask(n, a), PointSet::from_mask(n, b), lhs, rhs};
        return out;
      }
    }
  }
  out.exhausted = true;
  return out;
}

StrongSubadditivitySearch strong_subadd_search(const DerivedCapacity& cap, std::uint64_t max_pairs) {
  const auto& space = cap.tower->space();
  if (space.leaf_count() <= 16) return strong_subadd_search(CapacityTable(make_handle(cap.tower)), max_pairs);

  // Too large to tabulate: scan random pairs with a fixed seed.
  StrongSubadditivitySearch out;
  std::mt19937_64 rng(0x5eed);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n = space.leaf_count();
  for (; out.pairs_scanned < max_pairs; ++out.pairs_scanned) {
    PointSet a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (coin(rng)) a.insert(i);
      if (coin(rng)) b.insert(i);
    }
    const double lhs = capacity(cap, a | b) + capacity(cap, a & b);
    const double rhs = capacity(cap, a) + capacity(cap, b);
    if (lhs > rhs + 1e-9) {
      out.witness = StrongSubadditivityWitness{a, b, lhs, rhs};
      ++out.pairs_scanned;
      return out;
    }
  }
  return out;
}

SubmeasureHandle make_handle(std::shared_ptr<const NormTower> tower, std::string label) {
  if (!tower) throw std::invalid_argument("make_handle: null tower");
  bool is_measure = std::all_of(tower->levels().begin(), tower->levels().end(), [](const GoodNorm& n) {
    const auto* w = std::get_if<GoodNorm::WeightedP>(&n.variant());
    return w && w->p == 1.0;
  });
  HandleContext ctx;
  ctx.tower = tower;
  ctx.space = tower->space();
  const std::size_t universe = tower->space().leaf_count();
  return SubmeasureHandle(
      std::move(label), universe, [tower](const PointSet& A) { return capacity(*tower, A); },
      DeclaredProperties{true, true, is_measure}, std::move(ctx));
}

}  // namespace capacitylab::steprans
