#include "capacitylab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "capacitylab/errors.hpp"
#include "capacitylab/format.hpp"
#include "capacitylab/games.hpp"
#include "capacitylab/join.hpp"
#include "capacitylab/parallel.hpp"
#include "capacitylab/potential.hpp"
#include "capacitylab/steprans.hpp"

namespace capacitylab::verify {

namespace {

using Mask = std::uint64_t;

struct PropertyName {
  Property p;
  const char* name;
};

constexpr PropertyName kNames[] = {
    {Property::monotone, "monotone"},
    {Property::subadditive, "subadditive"},
    {Property::strongly_subadditive, "strongly_subadditive"},
    {Property::normalized, "normalized"},
    {Property::chain_continuity, "chain_continuity"},
    {Property::ratio_claim, "ratio_claim"},
    {Property::stability_biconditional, "stability_biconditional"},
    {Property::join_consistency, "join_consistency"},
    {Property::gamelemma, "gamelemma"},
};

std::vector<double> default_game_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 8; ++k) g.push_back(k / 8.0);
  return g;
}

std::vector<double> value_table(const SubmeasureHandle& c) {
  const std::size_t n = c.universe();
  std::vector<double> t(std::size_t{1} << n);
  parallel_for(t.size(), [&](std::size_t m) { t[m] = c(PointSet::from_mask(n, m)); });
  return t;
}

PointSet random_set(std::mt19937_64& rng, std::size_t n) {
  PointSet s(n);
  for (std::size_t i = 0; i < n; ++i)
    if (rng() & 1U) s.insert(i);
  return s;
}

PointSet random_subset(std::mt19937_64& rng, const PointSet& of) {
  PointSet s(of.universe());
  for (auto i : of.indices())
    if (rng() & 1U) s.insert(i);
  return s;
}

// Records a violation of size dev: the first one becomes the witness.
struct Tracker {
  PropertyResult& r;
  void violation(double dev, const std::function<Witness()>& make) {
    if (!r.witness) r.witness = make();
    r.max_deviation = std::max(r.max_deviation, dev);
  }
  void finish(bool definite) {
    if (r.witness)
      r.verdict = Verdict::fail;
    else
      r.verdict = definite ? Verdict::pass : Verdict::unknown;
  }
};

Witness plain(const char* relation, std::vector<PointSet> ops, std::vector<double> vals) {
  return Witness{relation, std::move(ops), std::move(vals)};
}

bool skip_if_too_large(PropertyResult& r, std::size_t n, std::size_t limit = kMaxExhaustiveUniverse) {
  if (r.spec.mode == Mode::exhaustive && n > limit) {
    r.verdict = Verdict::skipped;
    r.detail = "exhaustive budget exceeded: " + std::to_string(n) + " points (limit " + std::to_string(limit) + ")";
    return true;
  }
  return false;
}

void check_monotone(const SubmeasureHandle& c, PropertyResult& r) {
  const std::size_t n = c.universe();
  const double tol = r.spec.tolerance;
  Tracker tr{r};
  auto test = [&](const PointSet& A, const PointSet& B, double ca, double cb) {
    if (ca > cb + tol) tr.violation(ca - cb, [&] { return plain("c(A) <= c(B) for A inside B", {A, B}, {ca, cb}); });
  };
  if (r.spec.mode == Mode::exhaustive) {
    const auto t = value_table(c);
    for (Mask b = 0; b < t.size(); ++b)
      for (Mask a = b; a != 0;) {
        a = (a - 1) & b;
        ++r.cases;
        if (t[a] > t[b] + tol) test(PointSet::from_mask(n, a), PointSet::from_mask(n, b), t[a], t[b]);
      }
  } else {
    std::mt19937_64 rng(r.spec.seed);
    for (std::size_t k = 0; k < r.spec.trials; ++k) {
      PointSet B = random_set(rng, n);
      PointSet A = random_subset(rng, B);
      ++r.cases;
      test(A, B, c(A), c(B));
    }
  }
  tr.finish(true);
}

void check_subadditive(const SubmeasureHandle& c, PropertyResult& r, bool strong) {
  const std::size_t n = c.universe();
  const double tol = r.spec.tolerance;
  Tracker tr{r};
  auto test = [&](const PointSet& A, const PointSet& B, double ca, double cb, double cu, double ci) {
    const double lhs = strong ? cu + ci : cu;
    if (lhs > ca + cb + tol)
      tr.violation(lhs - ca - cb, [&] {
        return strong ? plain("c(A u B) + c(A n B) <= c(A) + c(B)", {A, B, A | B, A & B}, {ca, cb, cu, ci})
                      : plain("c(A u B) <= c(A) + c(B)", {A, B, A | B}, {ca, cb, cu});
      });
  };
  if (r.spec.mode == Mode::exhaustive) {
    const auto t = value_table(c);
    for (Mask a = 0; a < t.size(); ++a)
      for (Mask b = a; b < t.size(); ++b) {
        ++r.cases;
        const double lhs = strong ? t[a | b] + t[a & b] : t[a | b];
        if (lhs > t[a] + t[b] + tol)
          test(PointSet::from_mask(n, a), PointSet::from_mask(n, b), t[a], t[b], t[a | b], t[a & b]);
      }
    tr.finish(true);
  } else {
    std::mt19937_64 rng(r.spec.seed);
    for (std::size_t k = 0; k < r.spec.trials; ++k) {
      PointSet A = random_set(rng, n);
      PointSet B = random_set(rng, n);
      ++r.cases;
      test(A, B, c(A), c(B), c(A | B), strong ? c(A & B) : 0.0);
    }
    // a randomized scan cannot certify strong subadditivity
    tr.finish(!strong);
  }
}

void check_normalized(const SubmeasureHandle& c, PropertyResult& r) {
  PointSet empty(c.universe());
  const double v = c(empty);
  r.cases = 1;
  Tracker tr{r};
  if (std::abs(v) > r.spec.tolerance) tr.violation(std::abs(v), [&] { return plain("c(empty) = 0", {empty}, {v}); });
  tr.finish(true);
}

// Increasing chain A_1 < ... < A_k built by adding the points of A in order.
void check_chain_set(const SubmeasureHandle& c, const std::vector<std::size_t>& order, PropertyResult& r,
                     Tracker& tr, const std::function<double(const PointSet&)>& eval) {
  const std::size_t n = c.universe();
  std::vector<PointSet> chain;
  std::vector<double> vals;
  PointSet cur(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (auto i : order) {
    cur.insert(i);
    chain.push_back(cur);
    vals.push_back(eval(cur));
    mx = std::max(mx, vals.back());
  }
  if (chain.empty()) return;
  ++r.cases;
  const double dev = std::abs(vals.back() - mx);
  if (dev > r.spec.tolerance) tr.violation(dev, [&] { return plain("c(union A_i) = max c(A_i)", chain, vals); });
}

void check_chain(const SubmeasureHandle& c, PropertyResult& r) {
  const std::size_t n = c.universe();
  Tracker tr{r};
  if (r.spec.mode == Mode::exhaustive) {
    const auto t = value_table(c);
    auto eval = [&](const PointSet& s) { return t[s.to_mask()]; };
    for (Mask a = 1; a < t.size(); ++a) check_chain_set(c, PointSet::from_mask(n, a).indices(), r, tr, eval);
    tr.finish(true);
  } else {
    std::mt19937_64 rng(r.spec.seed);
    auto eval = [&](const PointSet& s) { return c(s); };
    for (std::size_t k = 0; k < r.spec.trials; ++k) {
      auto idx = random_set(rng, n).indices();
      std::shuffle(idx.begin(), idx.end(), rng);
      check_chain_set(c, idx, r, tr, eval);
    }
    tr.finish(true);
  }
}

std::vector<double> indicator(const PointSet& S) {
  std::vector<double> f(S.universe(), 0.0);
  for (auto i : S.indices()) f[i] = 1.0;
  return f;
}

void check_ratio(const SubmeasureHandle& c, PropertyResult& r) {
  const auto& tower = c.context().tower;
  if (!tower) {
    r.verdict = Verdict::skipped;
    r.detail = "handle has no norm tower";
    return;
  }
  const auto& space = tower->space();
  Tracker tr{r};
  std::size_t degenerate = 0;
  auto test = [&](const NodePath& t, const PointSet& Ot, const PointSet& S, double cot) {
    const double kt = steprans::relative_norm(*tower, t, indicator(S));
    const double cs = c(S);
    const double dev = std::abs(kt - cs / cot);
    ++r.cases;
    r.max_deviation = std::max(r.max_deviation, dev);
    if (dev > r.spec.tolerance)
      tr.violation(dev, [&] { return plain("k_t(f) = k(f) / k(O_t)", {S, Ot}, {kt, cs, cot}); });
  };
  if (r.spec.mode == Mode::exhaustive) {
    for (std::size_t len = 0; len <= space.depth(); ++len) {
      if (space.block_size(len) > kMaxExhaustiveUniverse) continue;
      for (std::size_t rank = 0; rank < space.nodes_at_length(len); ++rank) {
        const NodePath t = space.node_at(len, rank);
        const PointSet Ot = basic_open(space, t);
        const double cot = c(Ot);
        if (cot == 0.0) {
          ++degenerate;
          continue;
        }
        const auto [first, last] = space.leaf_range(t);
        const Mask sub = Mask{1} << (last - first);
        for (Mask m = 0; m < sub; ++m) {
          PointSet S(space.leaf_count());
          for (std::size_t i = 0; i < last - first; ++i)
            if ((m >> i) & 1U) S.insert(first + i);
          test(t, Ot, S, cot);
        }
      }
    }
    if (space.block_size(0) > kMaxExhaustiveUniverse) r.detail = "nodes with more than 10 leaves below were not scanned; ";
    tr.finish(true);
  } else {
    std::mt19937_64 rng(r.spec.seed);
    for (std::size_t k = 0; k < r.spec.trials; ++k) {
      const std::size_t len = rng() % (space.depth() + 1);
      const NodePath t = space.node_at(len, rng() % space.nodes_at_length(len));
      const PointSet Ot = basic_open(space, t);
      const double cot = c(Ot);
      if (cot == 0.0) {
        ++degenerate;
        continue;
      }
      test(t, Ot, random_subset(rng, Ot), cot);
    }
    tr.finish(true);
  }
  r.detail += std::to_string(degenerate) + " null cells skipped";
}

struct PotentialCache {
  std::vector<double> value;
  std::vector<PointSet> tilde;
};

PotentialCache potential_cache(const potential::Problem& prob) {
  potential::PotentialOperator op(prob.space, prob.kernel);
  const std::size_t n = op.x_size();
  PotentialCache pc;
  pc.value.resize(std::size_t{1} << n);
  pc.tilde.resize(pc.value.size());
  parallel_for(pc.value.size(), [&](std::size_t m) {
    const PointSet A = PointSet::from_mask(n, m);
    try {
      auto res = potential::capacity_gp(op, prob.p, A, prob.tol);
      pc.value[m] = res.value;
      pc.tilde[m] = potential::tilde_from_potential(op, A, res.potential.f, prob.tol);
    } catch (const Infeasible&) {
      // no admissible f: the capacity is +infinity and A has no potential
      pc.value[m] = std::numeric_limits<double>::infinity();
      pc.tilde[m] = A;
    }
  });
  return pc;
}

double potential_value(const SubmeasureHandle& c, const PointSet& A) {
  try {
    return c(A);
  } catch (const Infeasible&) {
    return std::numeric_limits<double>::infinity();
  }
}

void check_stability(const SubmeasureHandle& c, PropertyResult& r) {
  const auto& prob = c.context().potential;
  if (!prob) {
    r.verdict = Verdict::skipped;
    r.detail = "handle has no potential problem";
    return;
  }
  const std::size_t n = prob->space.x_size();
  if (skip_if_too_large(r, n, kMaxStabilityPoints)) return;
  Tracker tr{r};
  auto record = [&](const PointSet& A, const PointSet& B, const PointSet& tilde, const potential::StabilityVerdict& v) {
    ++r.cases;
    if (!v.passed())
      tr.violation(std::abs(v.c_b - v.c_a), [&] {
        return plain(v.forward_pass ? "c(B) > c(A) implies c(B \\ A~) > 0" : "c(B \\ A~) = 0 implies c(B) = c(A)",
                     {A, B, tilde, B - tilde}, {v.c_a, v.c_b, v.c_b_minus_tilde});
      });
  };
  if (r.spec.mode == Mode::exhaustive) {
    const auto pc = potential_cache(*prob);
    for (Mask b = 0; b < pc.value.size(); ++b)
      for (Mask a = b;; a = (a - 1) & b) {
        const PointSet A = PointSet::from_mask(n, a);
        const PointSet B = PointSet::from_mask(n, b);
        const PointSet& tilde = pc.tilde[a];
        const auto v = potential::judge_stability(pc.value[a], pc.value[b], pc.value[(B - tilde).to_mask()], prob->tol);
        record(A, B, tilde, v);
        if (a == 0) break;
      }
    tr.finish(true);
  } else {
    potential::PotentialOperator op(prob->space, prob->kernel);
    std::mt19937_64 rng(r.spec.seed);
    for (std::size_t k = 0; k < r.spec.trials; ++k) {
      const PointSet B = random_set(rng, n);
      const PointSet A = random_subset(rng, B);
      PointSet tilde = A;
      double ca;
      try {
        auto res = potential::capacity_gp(op, prob->p, A, prob->tol);
        ca = res.value;
        tilde = potential::tilde_from_potential(op, A, res.potential.f, prob->tol);
      } catch (const Infeasible&) {
        ca = std::numeric_limits<double>::infinity();
      }
      record(A, B, tilde,
             potential::judge_stability(ca, potential_value(c, B), potential_value(c, B - tilde), prob->tol));
    }
    tr.finish(true);
  }
}

void check_join(const SubmeasureHandle& b, PropertyResult& r) {
  const auto& cs = b.context().join_components;
  if (cs.empty()) {
    r.verdict = Verdict::skipped;
    r.detail = "handle has no join components";
    return;
  }
  const std::size_t n = b.universe();
  const double tol = r.spec.tolerance;
  Tracker tr{r};
  std::function<double(const PointSet&)> bv = [&](const PointSet& s) { return b(s); };
  std::vector<std::function<double(const PointSet&)>> cv;
  std::vector<double> bt;
  std::vector<std::vector<double>> ct;
  if (r.spec.mode == Mode::exhaustive) {
    bt = value_table(b);
    for (const auto& c : cs) ct.push_back(value_table(c));
    bv = [&](const PointSet& s) { return bt[s.to_mask()]; };
    for (std::size_t m = 0; m < cs.size(); ++m) cv.push_back([&, m](const PointSet& s) { return ct[m][s.to_mask()]; });
  } else {
    for (const auto& c : cs) cv.push_back([&c](const PointSet& s) { return c(s); });
  }

  auto single = [&](const PointSet& A) {
    const double ba = bv(A);
    for (std::size_t m = 0; m < cs.size(); ++m) {
      ++r.cases;
      const double cm = cv[m](A);
      if (ba > cm + tol)
        tr.violation(ba - cm, [&] { return plain("b(A) <= c_m(A)", {A}, {ba, cm, static_cast<double>(m)}); });
    }
    ++r.cases;
    const bool zero = ba <= 1e-12;
    const bool has_null = join::null_decompose(cs, A).has_value();
    if (zero != has_null)
      tr.violation(ba, [&] {
        return plain("b(A) = 0 iff a null decomposition exists", {A}, {ba, has_null ? 1.0 : 0.0});
      });
  };
  auto pair = [&](const PointSet& A, const PointSet& B) {
    const double ba = bv(A), bb = bv(B), bu = bv(A | B);
    r.cases += 2;
    if (A.is_subset_of(B) && ba > bb + tol)
      tr.violation(ba - bb, [&] { return plain("b(A) <= b(B) for A inside B", {A, B}, {ba, bb}); });
    if (bu > ba + bb + tol)
      tr.violation(bu - ba - bb, [&] { return plain("b(A u B) <= b(A) + b(B)", {A, B, A | B}, {ba, bb, bu}); });
  };

  if (r.spec.mode == Mode::exhaustive) {
    for (Mask a = 0; a < bt.size(); ++a) single(PointSet::from_mask(n, a));
    for (Mask a = 0; a < bt.size(); ++a)
      for (Mask c = 0; c < bt.size(); ++c) pair(PointSet::from_mask(n, a), PointSet::from_mask(n, c));
    tr.finish(true);
  } else {
    std::mt19937_64 rng(r.spec.seed);
    for (std::size_t k = 0; k < r.spec.trials; ++k) {
      const PointSet B = random_set(rng, n);
      const PointSet A = random_subset(rng, B);
      single(A);
      pair(A, B);
      pair(A, random_set(rng, n));
    }
    tr.finish(true);
  }
}

std::optional<ProductTreeSpace> resolve_space(const SubmeasureHandle& c, const std::optional<ProductTreeSpace>& space) {
  if (space) return space;
  if (c.context().space) return c.context().space;
  if (c.context().tower) return c.context().tower->space();
  return std::nullopt;
}

void check_gamelemma(const SubmeasureHandle& c, PropertyResult& r, const std::optional<ProductTreeSpace>& space) {
  if (!space) {
    r.verdict = Verdict::skipped;
    r.detail = "no product space for the game";
    return;
  }
  if (space->leaf_count() != c.universe()) {
    r.verdict = Verdict::skipped;
    r.detail = "handle universe does not match the space";
    return;
  }
  if (space->leaf_count() > 8) {
    r.verdict = Verdict::skipped;
    r.detail = "game budget exceeded: more than 8 leaves";
    return;
  }
  const auto grid = r.spec.epsilon_grid.empty() ? default_game_grid() : r.spec.epsilon_grid;
  const auto rep = games::verify_gamelemma(*space, c, grid, true);
  r.cases = rep.cells.size();
  Tracker tr{r};
  auto add = [&](const games::GameCell& cell, const char* rel) {
    tr.violation(std::abs(cell.capacity - cell.epsilon), [&] {
      return plain(rel, {PointSet::from_mask(space->leaf_count(), cell.target)},
                   {cell.capacity, cell.epsilon, cell.winner == games::Player::I ? 1.0 : 2.0});
    });
  };
  for (const auto& cell : rep.forward_violations) add(cell, "c(B) < eps implies Player I wins");
  for (const auto& cell : rep.backward_violations) add(cell, "Player I wins implies c(B) <= eps");
  if (rep.replay_failures && !r.witness) {
    r.witness = Witness{"strategy replay", {}, {static_cast<double>(rep.replay_failures)}};
  }
  r.detail = "boundary cells " + std::to_string(rep.boundary_cells) + ", won by I " +
             std::to_string(rep.boundary_player_one_wins) + ", replay failures " + std::to_string(rep.replay_failures);
  tr.finish(true);
}

PropertyResult run_one(const SubmeasureHandle& c, const PropertySpec& spec, const std::optional<ProductTreeSpace>& space) {
  PropertyResult r;
  r.spec = spec;
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = c.universe();
  try {
    switch (spec.name) {
      case Property::monotone:
        if (!skip_if_too_large(r, n)) check_monotone(c, r);
        break;
      case Property::subadditive:
        if (!skip_if_too_large(r, n)) check_subadditive(c, r, false);
        break;
      case Property::strongly_subadditive:
        if (!skip_if_too_large(r, n)) check_subadditive(c, r, true);
        break;
      case Property::normalized:
        check_normalized(c, r);
        break;
      case Property::chain_continuity:
        if (!skip_if_too_large(r, n)) check_chain(c, r);
        break;
      case Property::ratio_claim:
        check_ratio(c, r);
        break;
      case Property::stability_biconditional:
        check_stability(c, r);
        break;
      case Property::join_consistency:
        if (!skip_if_too_large(r, n)) check_join(c, r);
        break;
      case Property::gamelemma:
        check_gamelemma(c, r, space);
        break;
    }
  } catch (const std::exception& e) {
    r.verdict = Verdict::skipped;
    r.witness.reset();
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

nlohmann::ordered_json real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return round_significant(v);
}

}  // namespace

std::string to_string(Property p) {
  for (const auto& n : kNames)
    if (n.p == p) return n.name;
  return "unknown";
}

std::optional<Property> property_from_string(std::string_view name) {
  for (const auto& n : kNames)
    if (name == n.name) return n.p;
  return std::nullopt;
}

std::vector<Property> all_properties() {
  std::vector<Property> out;
  for (const auto& n : kNames) out.push_back(n.p);
  return out;
}

std::string to_string(Mode m) { return m == Mode::exhaustive ? "exhaustive" : "randomized"; }

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::skipped:
      return "skipped";
    case Verdict::unknown:
      return "unknown";
  }
  return "unknown";
}

std::size_t PropertyReport::count(Verdict v) const {
  return static_cast<std::size_t>(std::count_if(results.begin(), results.end(), [v](const auto& r) { return r.verdict == v; }));
}

nlohmann::ordered_json PropertyReport::to_json(bool include_timing) const {
  nlohmann::ordered_json j;
  j["handle"] = handle;
  auto& props = j["properties"] = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json p;
    p["name"] = to_string(r.spec.name);
    p["mode"] = to_string(r.spec.mode);
    if (r.spec.mode == Mode::randomized) {
      p["trials"] = r.spec.trials;
      p["seed"] = r.spec.seed;
    }
    p["tolerance"] = real(r.spec.tolerance);
    p["verdict"] = to_string(r.verdict);
    p["cases"] = r.cases;
    p["max_deviation"] = real(r.max_deviation);
    if (!r.detail.empty()) p["detail"] = r.detail;
    if (r.witness) {
      nlohmann::ordered_json w;
      w["relation"] = r.witness->relation;
      w["operands"] = nlohmann::ordered_json::array();
      for (const auto& s : r.witness->operands) w["operands"].push_back(s.to_string());
      w["values"] = nlohmann::ordered_json::array();
      for (double v : r.witness->values) w["values"].push_back(real(v));
      p["witness"] = w;
    }
    props.push_back(p);
  }
  j["totals"] = {{"pass", count(Verdict::pass)},
                 {"fail", count(Verdict::fail)},
                 {"unknown", count(Verdict::unknown)},
                 {"skipped", count(Verdict::skipped)}};
  if (include_timing) {
    nlohmann::ordered_json t;
    t["total_seconds"] = seconds;
    for (const auto& r : results) t["per_property"].push_back({{"name", to_string(r.spec.name)}, {"seconds", r.seconds}});
    j["timing"] = t;
  }
  return j;
}

std::string PropertyReport::to_table() const {
  std::ostringstream out;
  out << "handle " << handle << '\n';
  for (const auto& r : results) {
    std::string name = to_string(r.spec.name);
    name.resize(std::max<std::size_t>(name.size(), 26), ' ');
    std::string verdict = to_string(r.verdict);
    verdict.resize(std::max<std::size_t>(verdict.size(), 8), ' ');
    out << "  " << name << verdict << r.cases << " cases";
    if (r.witness) {
      out << "  witness:";
      for (const auto& s : r.witness->operands) out << ' ' << s.to_string();
      out << "  (" << r.witness->relation << ')';
    }
    if (!r.detail.empty()) out << "  [" << r.detail << ']';
    out << '\n';
  }
  out << "  pass " << count(Verdict::pass) << ", fail " << count(Verdict::fail) << ", unknown "
      << count(Verdict::unknown) << ", skipped " << count(Verdict::skipped) << '\n';
  return out.str();
}

PropertyReport run_suite(const SubmeasureHandle& handle, const std::vector<PropertySpec>& specs,
                         const std::optional<ProductTreeSpace>& space) {
  PropertyReport rep;
  rep.handle = handle.label();
  const auto start = std::chrono::steady_clock::now();
  const auto sp = resolve_space(handle, space);
  rep.results.resize(specs.size());
  parallel_for(specs.size(), [&](std::size_t i) { rep.results[i] = run_one(handle, specs[i], sp); });
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

bool reproduces(const SubmeasureHandle& c, const PropertyResult& r, const std::optional<ProductTreeSpace>& space) {
  if (r.verdict != Verdict::fail || !r.witness) return false;
  const auto& w = *r.witness;
  const auto& ops = w.operands;
  const double tol = r.spec.tolerance;
  auto same = [&](const std::vector<double>& now) {
    if (now.size() > w.values.size()) return false;
    for (std::size_t i = 0; i < now.size(); ++i)
      if (now[i] != w.values[i] && !(std::isinf(now[i]) && std::isinf(w.values[i]))) return false;
    return true;
  };
  switch (r.spec.name) {
    case Property::monotone: {
      const double a = c(ops.at(0)), b = c(ops.at(1));
      return same({a, b}) && ops[0].is_subset_of(ops[1]) && a > b + tol;
    }
    case Property::subadditive: {
      const double a = c(ops.at(0)), b = c(ops.at(1)), u = c(ops.at(0) | ops.at(1));
      return same({a, b, u}) && u > a + b + tol;
    }
    case Property::strongly_subadditive: {
      const double a = c(ops.at(0)), b = c(ops.at(1)), u = c(ops[0] | ops[1]), i = c(ops[0] & ops[1]);
      return same({a, b, u, i}) && u + i > a + b + tol;
    }
    case Property::normalized: {
      const double v = c(PointSet(c.universe()));
      return same({v}) && std::abs(v) > tol;
    }
    case Property::chain_continuity: {
      std::vector<double> vals;
      for (std::size_t i = 0; i < ops.size(); ++i) {
        if (i && !ops[i - 1].is_subset_of(ops[i])) return false;
        vals.push_back(c(ops[i]));
      }
      if (vals.empty()) return false;
      return same(vals) && std::abs(vals.back() - *std::max_element(vals.begin(), vals.end())) > tol;
    }
    case Property::ratio_claim: {
      const auto& tower = c.context().tower;
      if (!tower) return false;
      const auto paths = canonical_decomposition(tower->space(), ops.at(1));
      if (paths.size() != 1) return false;
      const double kt = steprans::relative_norm(*tower, paths[0], indicator(ops.at(0)));
      const double cs = c(ops[0]), cot = c(ops[1]);
      return same({kt, cs, cot}) && std::abs(kt - cs / cot) > tol;
    }
    case Property::stability_biconditional: {
      const auto& prob = c.context().potential;
      if (!prob) return false;
      const double ca = potential_value(c, ops.at(0)), cb = potential_value(c, ops.at(1));
      const double cr = potential_value(c, ops.at(1) - ops.at(2));
      return same({ca, cb, cr}) && !potential::judge_stability(ca, cb, cr, prob->tol).passed();
    }
    case Property::join_consistency: {
      const auto& cs = c.context().join_components;
      if (cs.empty()) return false;
      if (w.relation == "b(A) <= c_m(A)") {
        const auto m = static_cast<std::size_t>(w.values.at(2));
        const double b = c(ops.at(0)), cm = cs.at(m)(ops[0]);
        return same({b, cm}) && b > cm + tol;
      }
      if (w.relation == "b(A) = 0 iff a null decomposition exists") {
        const double b = c(ops.at(0));
        const bool has = join::null_decompose(cs, ops[0]).has_value();
        return same({b, has ? 1.0 : 0.0}) && ((b <= 1e-12) != has);
      }
      if (w.relation == "b(A) <= b(B) for A inside B") {
        const double a = c(ops.at(0)), b = c(ops.at(1));
        return same({a, b}) && a > b + tol;
      }
      const double a = c(ops.at(0)), b = c(ops.at(1)), u = c(ops[0] | ops[1]);
      return same({a, b, u}) && u > a + b + tol;
    }
    case Property::gamelemma: {
      const auto sp = resolve_space(c, space);
      if (!sp || ops.empty()) return false;
      const double eps = w.values.at(1);
      games::TruncatedGameH g{*sp, c, ops[0], eps, std::nullopt};
      const auto out = games::solve_minimax(g);
      const double cb = c(ops[0]);
      const double winner = out.winner == games::Player::I ? 1.0 : 2.0;
      if (!same({cb, eps, winner})) return false;
      return (cb < eps - 1e-12 && out.winner != games::Player::I) || (out.winner == games::Player::I && cb > eps + 1e-12);
    }
  }
  return false;
}

}  // namespace capacitylab::verify
