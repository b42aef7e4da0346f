#include "capacitylab/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "capacitylab/join.hpp"
#include "capacitylab/runner.hpp"

namespace capacitylab::config {

namespace {

const std::set<std::string, std::less<>> kSectionTypes{"global", "space", "tower", "potential", "set", "handle", "task"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

struct Diagnostics {
  std::vector<std::string> messages;
  void add(std::size_t line, std::size_t column, const std::string& msg) {
    messages.push_back("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
  }
  void add(const Entry& e, const std::string& msg) { add(e.line, e.column, e.key + ": " + msg); }
  void add(const Section& s, const std::string& msg) {
    add(s.line, 1, "[" + s.type + (s.name.empty() ? "" : " " + s.name) + "] " + msg);
  }
};

// Keys a section may carry, and the ones it must.
struct KeyRules {
  std::vector<std::string> allowed;
  std::vector<std::string> required;
  std::vector<std::string> repeatable;
};

const std::map<std::string, KeyRules, std::less<>>& section_rules() {
  static const std::map<std::string, KeyRules, std::less<>> rules{
      {"global", {{"seed", "tol"}, {}, {}}},
      {"space", {{"arities", "base"}, {"arities"}, {}}},
      {"tower", {{"space", "level"}, {"space", "level"}, {"level"}}},
      {"potential", {{"nu", "M", "X", "x_count", "kernel", "p", "tol"}, {"nu", "kernel"}, {}}},
      {"set", {{"space", "universe", "potential", "leaves", "paths"}, {}, {}}},
      {"handle",
       {{"kind", "tower", "space", "universe", "weights", "values", "point", "potential", "components"}, {"kind"}, {}}},
  };
  return rules;
}

void check_keys(const Section& s, Diagnostics& d) {
  if (s.type == "task") return;  // checked per task kind by the runner
  const auto& rules = section_rules().at(s.type);
  std::set<std::string> seen;
  for (const auto& e : s.entries) {
    if (std::find(rules.allowed.begin(), rules.allowed.end(), e.key) == rules.allowed.end()) {
      d.add(e, "unknown key in [" + s.type + "]");
      continue;
    }
    if (!seen.insert(e.key).second &&
        std::find(rules.repeatable.begin(), rules.repeatable.end(), e.key) == rules.repeatable.end())
      d.add(e, "duplicate key");
  }
  for (const auto& k : rules.required)
    if (!s.find(k)) d.add(s, "missing required key '" + k + "'");
}

template <class F>
auto guarded(Diagnostics& d, const Entry& e, F&& f) -> std::optional<decltype(f())> {
  try {
    return f();
  } catch (const std::exception& ex) {
    d.add(e, ex.what());
    return std::nullopt;
  }
}

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

// "name k1=v1 k2=v2" -> name and key/value pairs
std::pair<std::string, std::map<std::string, std::string>> parse_spec(std::string_view text) {
  auto toks = split_ws(text);
  if (toks.empty()) throw std::invalid_argument("empty specification");
  std::map<std::string, std::string> kv;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    auto eq = toks[i].find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("expected key=value, got '" + toks[i] + "'");
    if (!kv.emplace(toks[i].substr(0, eq), toks[i].substr(eq + 1)).second)
      throw std::invalid_argument("duplicate parameter '" + toks[i].substr(0, eq) + "'");
  }
  return {toks[0], kv};
}

void expect_only(const std::map<std::string, std::string>& kv, std::initializer_list<const char*> allowed,
                 const std::string& what) {
  for (const auto& [k, v] : kv)
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
      throw std::invalid_argument(what + ": unknown parameter '" + k + "'");
}

steprans::GoodNorm parse_level(std::string_view text, std::size_t arity) {
  auto [name, kv] = parse_spec(text);
  if (name == "max") {
    expect_only(kv, {}, "max");
    return steprans::GoodNorm::max(arity);
  }
  if (name == "uniform") {
    expect_only(kv, {"p"}, "uniform");
    return steprans::GoodNorm::uniform(arity, kv.count("p") ? parse_real(kv["p"]) : 1.0);
  }
  if (name == "wp") {
    expect_only(kv, {"p", "w"}, "wp");
    if (!kv.count("w")) throw std::invalid_argument("wp: missing w=");
    const double p = kv.count("p") ? parse_real(kv["p"]) : 1.0;
    auto parts = split_list(kv["w"]);
    if (parts.size() != arity)
      throw std::invalid_argument("wp: " + std::to_string(parts.size()) + " weights for arity " + std::to_string(arity));
    if (p == 1.0) {
      // rational weights enable exact evaluation
      std::vector<steprans::Rational> exact;
      bool all_rational = true;
      for (const auto& w : parts) {
        try {
          exact.push_back(steprans::parse_exact_rational(w));
        } catch (const std::exception&) {
          all_rational = false;
          break;
        }
      }
      if (all_rational) return steprans::GoodNorm::weighted_exact(std::move(exact));
    }
    std::vector<double> w;
    for (const auto& s : parts) w.push_back(parse_real(s));
    return steprans::GoodNorm::weighted_p(std::move(w), p);
  }
  if (name == "table") {
    expect_only(kv, {"v"}, "table");
    if (!kv.count("v")) throw std::invalid_argument("table: missing v=");
    return steprans::GoodNorm::table(arity, parse_real_list(kv["v"]));
  }
  throw std::invalid_argument("unknown norm '" + name + "' (expected max, uniform, wp or table)");
}

potential::Kernel parse_kernel(std::string_view text, std::size_t coord_dim) {
  auto [name, kv] = parse_spec(text);
  auto opt_cap = [&](std::optional<double> dflt) -> std::optional<double> {
    if (!kv.count("kmax")) return dflt;
    if (kv["kmax"] == "none") return std::nullopt;
    return parse_real(kv["kmax"]);
  };
  auto dim = [&]() -> int {
    if (kv.count("n")) return static_cast<int>(parse_unsigned(kv["n"]));
    if (coord_dim == 0) throw std::invalid_argument(name + ": n= required without coordinates");
    return static_cast<int>(coord_dim);
  };
  if (name == "riesz") {
    expect_only(kv, {"alpha", "n", "gamma", "kmax"}, "riesz");
    potential::RieszKernel k;
    if (!kv.count("alpha")) throw std::invalid_argument("riesz: missing alpha=");
    k.alpha = parse_real(kv["alpha"]);
    k.dim = dim();
    if (kv.count("gamma")) k.gamma = parse_real(kv["gamma"]);
    k.k_max = opt_cap(k.k_max);
    if (!(k.alpha > 0.0 && k.alpha < k.dim)) throw std::invalid_argument("riesz: need 0 < alpha < n");
    if (!(k.gamma > 0.0)) throw std::invalid_argument("riesz: gamma must be positive");
    return k;
  }
  if (name == "bessel") {
    expect_only(kv, {"alpha", "n", "a", "step", "kmax"}, "bessel");
    potential::BesselKernel k;
    if (!kv.count("alpha")) throw std::invalid_argument("bessel: missing alpha=");
    k.alpha = parse_real(kv["alpha"]);
    k.dim = dim();
    if (kv.count("a")) k.a = parse_real(kv["a"]);
    if (kv.count("step")) k.step = parse_real(kv["step"]);
    k.k_max = opt_cap(k.k_max);
    if (!(k.alpha > 0.0)) throw std::invalid_argument("bessel: alpha must be positive");
    if (!(k.a > 0.0)) throw std::invalid_argument("bessel: a must be positive");
    if (!(k.step > 0.0)) throw std::invalid_argument("bessel: step must be positive");
    return k;
  }
  if (name == "constant") {
    expect_only(kv, {"value"}, "constant");
    potential::ConstantKernel k;
    if (kv.count("value")) k.value = parse_real(kv["value"]);
    if (!(k.value >= 0.0)) throw std::invalid_argument("constant: value must be nonnegative");
    return k;
  }
  if (name == "diagonal") {
    expect_only(kv, {}, "diagonal");
    return potential::DiagonalKernel{};
  }
  if (name == "matrix") {
    expect_only(kv, {"rows"}, "matrix");
    if (!kv.count("rows")) throw std::invalid_argument("matrix: missing rows=");
    potential::ExplicitMatrixKernel k;
    for (const auto& row : split_list(kv["rows"], ';')) k.rows.push_back(parse_real_list(row));
    return k;
  }
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

std::vector<potential::Point> parse_points(std::string_view text) {
  std::vector<potential::Point> out;
  for (const auto& p : split_list(text, ';')) out.push_back(parse_real_list(p));
  if (out.empty()) throw std::invalid_argument("no points");
  for (const auto& p : out)
    if (p.size() != out.front().size()) throw std::invalid_argument("points of different dimension");
  return out;
}

NodePath parse_path(std::string_view text) {
  NodePath t;
  text = trim(text);
  if (text == "()" || text.empty()) return t;
  for (const auto& c : split_list(text, '.')) t.push_back(parse_unsigned(c));
  return t;
}

// The universe a set or handle lives on, from space=, universe= or potential=.
std::optional<std::size_t> universe_of(const Section& s, const Workspace& ws, Diagnostics& d, bool allow_potential) {
  const Entry* sp = s.find("space");
  const Entry* un = s.find("universe");
  const Entry* po = allow_potential ? s.find("potential") : nullptr;
  const int given = (sp != nullptr) + (un != nullptr) + (po != nullptr);
  if (given != 1) {
    d.add(s, allow_potential ? "exactly one of space=, universe=, potential= required"
                             : "exactly one of space=, universe= required");
    return std::nullopt;
  }
  if (sp) {
    auto it = ws.spaces.find(sp->value);
    if (it == ws.spaces.end()) {
      d.add(*sp, "undeclared space '" + sp->value + "'");
      return std::nullopt;
    }
    return it->second.space.leaf_count();
  }
  if (un) {
    auto n = guarded(d, *un, [&] { return parse_unsigned(un->value); });
    if (n && (*n == 0 || *n > CapacityTable::kMaxUniverse)) {
      d.add(*un, "universe must lie in [1, 20]");
      return std::nullopt;
    }
    return n;
  }
  auto it = ws.potentials.find(po->value);
  if (it == ws.potentials.end()) {
    d.add(*po, "undeclared potential '" + po->value + "'");
    return std::nullopt;
  }
  return it->second->space.x_size();
}

void build_spaces(const ExperimentConfig& cfg, Workspace& ws, Diagnostics& d) {
  for (const Section* s : cfg.of_type("space")) {
    const Entry* ar = s->find("arities");
    if (!ar) continue;
    auto built = guarded(d, *ar, [&] {
      std::vector<std::size_t> arities;
      for (const auto& a : split_list(ar->value)) arities.push_back(parse_unsigned(a));
      return ProductTreeSpace(std::move(arities));
    });
    TreeMetric metric;
    if (const Entry* b = s->find("base")) {
      auto base = guarded(d, *b, [&] {
        TreeMetric m{parse_real(b->value)};
        m.validate();
        return m.base;
      });
      if (base) metric.base = *base;
    }
    if (built) ws.spaces.emplace(s->name, SpaceEntry{*built, metric});
  }
}

void build_towers(const ExperimentConfig& cfg, Workspace& ws, Diagnostics& d) {
  for (const Section* s : cfg.of_type("tower")) {
    const Entry* sp = s->find("space");
    if (!sp) continue;
    auto it = ws.spaces.find(sp->value);
    if (it == ws.spaces.end()) {
      d.add(*sp, "undeclared space '" + sp->value + "'");
      continue;
    }
    const auto& space = it->second.space;
    auto levels = s->find_all("level");
    if (levels.size() != space.depth()) {
      d.add(*s, std::to_string(levels.size()) + " levels for a space of depth " + std::to_string(space.depth()));
      continue;
    }
    std::vector<steprans::GoodNorm> norms;
    bool ok = true;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      auto n = guarded(d, *levels[i], [&] { return parse_level(levels[i]->value, space.arity(i)); });
      if (n)
        norms.push_back(*n);
      else
        ok = false;
    }
    if (!ok) continue;
    try {
      ws.towers.emplace(s->name, std::make_shared<const steprans::NormTower>(space, std::move(norms)));
      ws.tower_spaces.emplace(s->name, sp->value);
    } catch (const std::exception& e) {
      d.add(*s, e.what());
    }
  }
}

void build_potentials(const ExperimentConfig& cfg, Workspace& ws, Diagnostics& d, std::vector<std::string>* warnings) {
  for (const Section* s : cfg.of_type("potential")) {
    const Entry* nu_e = s->find("nu");
    const Entry* k_e = s->find("kernel");
    if (!nu_e || !k_e) continue;
    bool ok = true;
    auto nu = guarded(d, *nu_e, [&] { return parse_real_list(nu_e->value); });
    ok &= nu.has_value();
    std::vector<potential::Point> M, X;
    if (const Entry* e = s->find("M")) {
      auto pts = guarded(d, *e, [&] { return parse_points(e->value); });
      if (pts) M = *pts; else ok = false;
    }
    if (const Entry* e = s->find("X")) {
      auto pts = guarded(d, *e, [&] { return parse_points(e->value); });
      if (pts) X = *pts; else ok = false;
    }
    if (!ok) continue;
    potential::DiscretePotentialSpace space;
    space.nu = *nu;
    space.m_points = M;
    if (!X.empty()) {
      space.x_points = X;
      space.x_count = X.size();
    } else if (!M.empty()) {
      space.x_points = M;
      space.x_count = M.size();
    } else {
      space.x_count = nu->size();
    }
    if (const Entry* e = s->find("x_count")) {
      if (!space.x_points.empty()) {
        d.add(*e, "x_count conflicts with evaluation coordinates");
        continue;
      }
      auto n = guarded(d, *e, [&] { return parse_unsigned(e->value); });
      if (!n) continue;
      space.x_count = *n;
    }
    if (space.x_count == 0 || space.x_count > CapacityTable::kMaxUniverse) {
      d.add(*s, "between 1 and 20 evaluation points required");
      continue;
    }
    auto kernel = guarded(d, *k_e, [&] { return parse_kernel(k_e->value, M.empty() ? 0 : M.front().size()); });
    if (!kernel) continue;
    auto prob = std::make_shared<potential::Problem>(potential::Problem{space, *kernel, 2.0, 1e-6});
    if (const Entry* e = s->find("p")) {
      auto p = guarded(d, *e, [&] {
        double v = parse_real(e->value);
        if (!(v >= 1.0) || !std::isfinite(v)) throw std::invalid_argument("p must be a finite real >= 1");
        return v;
      });
      if (!p) continue;
      prob->p = *p;
      if (*p == 1.0 && warnings)
        warnings->push_back("potential '" + s->name + "': p = 1 is not strictly convex; uniqueness contract void");
    }
    if (const Entry* e = s->find("tol")) {
      auto t = guarded(d, *e, [&] {
        double v = parse_real(e->value);
        if (!(v > 0.0)) throw std::invalid_argument("tol must be positive");
        return v;
      });
      if (!t) continue;
      prob->tol = *t;
    }
    try {
      potential::PotentialOperator probe(prob->space, prob->kernel);
      if (probe.capped_entries() && warnings)
        warnings->push_back("potential '" + s->name + "': " + std::to_string(probe.capped_entries()) +
                            " kernel entries capped at kmax");
    } catch (const std::exception& e) {
      d.add(*k_e, e.what());
      continue;
    }
    ws.potentials.emplace(s->name, std::move(prob));
  }
}

void build_sets(const ExperimentConfig& cfg, Workspace& ws, Diagnostics& d) {
  for (const Section* s : cfg.of_type("set")) {
    auto n = universe_of(*s, ws, d, true);
    if (!n) continue;
    const Entry* lv = s->find("leaves");
    const Entry* pa = s->find("paths");
    if ((lv != nullptr) == (pa != nullptr)) {
      d.add(*s, "exactly one of leaves=, paths= required");
      continue;
    }
    if (lv) {
      auto set = guarded(d, *lv, [&] {
        PointSet out(*n);
        for (const auto& i : split_list(lv->value)) {
          auto k = parse_unsigned(i);
          if (k >= *n) throw std::invalid_argument("point " + i + " outside a universe of " + std::to_string(*n));
          out.insert(k);
        }
        return out;
      });
      if (set) ws.sets.emplace(s->name, *set);
    } else {
      const Entry* sp = s->find("space");
      if (!sp) {
        d.add(*pa, "paths= needs space=");
        continue;
      }
      const auto& space = ws.spaces.at(sp->value).space;
      auto set = guarded(d, *pa, [&] {
        std::vector<NodePath> paths;
        for (const auto& p : split_list(pa->value, ';')) paths.push_back(parse_path(p));
        return from_paths(space, paths);
      });
      if (set) ws.sets.emplace(s->name, *set);
    }
  }
}

std::optional<HandleEntry> build_handle(const Section& s, Workspace& ws, Diagnostics& d, bool& deferred) {
  deferred = false;
  const Entry* k = s.find("kind");
  if (!k) return std::nullopt;
  const std::string& kind = k->value;
  auto require = [&](const char* key) -> const Entry* {
    const Entry* e = s.find(key);
    if (!e) d.add(s, "kind " + kind + " needs " + key + "=");
    return e;
  };
  auto only = [&](std::initializer_list<const char*> keys) {
    bool ok = true;
    for (const auto& e : s.entries) {
      if (e.key == "kind") continue;
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return e.key == a; })) {
        d.add(e, "not used by handle kind " + kind);
        ok = false;
      }
    }
    return ok;
  };
  auto space_name = [&]() -> std::optional<std::string> {
    if (const Entry* e = s.find("space")) return e->value;
    return std::nullopt;
  };
  try {
    if (kind == "tower") {
      if (!only({"tower"})) return std::nullopt;
      const Entry* t = require("tower");
      if (!t) return std::nullopt;
      auto it = ws.towers.find(t->value);
      if (it == ws.towers.end()) {
        d.add(*t, "undeclared tower '" + t->value + "'");
        return std::nullopt;
      }
      return HandleEntry{steprans::make_handle(it->second, s.name), ws.tower_spaces.at(t->value)};
    }
    if (kind == "uniform") {
      if (!only({"space", "universe"})) return std::nullopt;
      auto n = universe_of(s, ws, d, false);
      if (!n) return std::nullopt;
      return HandleEntry{uniform_measure(*n, s.name), space_name()};
    }
    if (kind == "weights") {
      if (!only({"weights", "space"})) return std::nullopt;
      const Entry* w = require("weights");
      if (!w) return std::nullopt;
      auto weights = guarded(d, *w, [&] { return parse_real_list(w->value); });
      if (!weights) return std::nullopt;
      if (auto sn = space_name()) {
        auto it = ws.spaces.find(*sn);
        if (it == ws.spaces.end()) {
          d.add(*s.find("space"), "undeclared space '" + *sn + "'");
          return std::nullopt;
        }
        if (it->second.space.leaf_count() != weights->size()) {
          d.add(*w, "one weight per leaf of space '" + *sn + "' expected");
          return std::nullopt;
        }
      }
      return HandleEntry{weighted_measure(*weights, s.name), space_name()};
    }
    if (kind == "table") {
      if (!only({"values", "space", "universe"})) return std::nullopt;
      auto n = universe_of(s, ws, d, false);
      const Entry* v = require("values");
      if (!n || !v) return std::nullopt;
      auto vals = guarded(d, *v, [&] { return parse_real_list(v->value); });
      if (!vals) return std::nullopt;
      if (vals->size() != (std::size_t{1} << *n)) {
        d.add(*v, "2^" + std::to_string(*n) + " values expected, indexed by bitmask");
        return std::nullopt;
      }
      // a table claims nothing; verify tasks decide
      return HandleEntry{table_submeasure(*n, *vals, s.name, DeclaredProperties{false, false, false}), space_name()};
    }
    if (kind == "pointmass") {
      if (!only({"point", "space", "universe"})) return std::nullopt;
      auto n = universe_of(s, ws, d, false);
      const Entry* p = require("point");
      if (!n || !p) return std::nullopt;
      auto pt = guarded(d, *p, [&] { return parse_unsigned(p->value); });
      if (!pt) return std::nullopt;
      if (*pt >= *n) {
        d.add(*p, "point outside the universe");
        return std::nullopt;
      }
      return HandleEntry{point_mass(*n, *pt, s.name), space_name()};
    }
    if (kind == "potential") {
      if (!only({"potential"})) return std::nullopt;
      const Entry* p = require("potential");
      if (!p) return std::nullopt;
      auto it = ws.potentials.find(p->value);
      if (it == ws.potentials.end()) {
        d.add(*p, "undeclared potential '" + p->value + "'");
        return std::nullopt;
      }
      return HandleEntry{potential::make_handle(it->second, s.name), std::nullopt};
    }
    if (kind == "join") {
      if (!only({"components"})) return std::nullopt;
      const Entry* c = require("components");
      if (!c) return std::nullopt;
      std::vector<SubmeasureHandle> comps;
      std::optional<std::string> sp;
      for (const auto& name : split_list(c->value)) {
        auto it = ws.handles.find(name);
        if (it == ws.handles.end()) {
          deferred = true;
          return std::nullopt;
        }
        comps.push_back(it->second.handle);
        if (!sp) sp = it->second.space;
      }
      if (comps.empty()) {
        d.add(*c, "at least one component required");
        return std::nullopt;
      }
      for (const auto& h : comps)
        if (h.universe() != comps.front().universe()) {
          d.add(*c, "components live on different universes");
          return std::nullopt;
        }
      return HandleEntry{join::make_handle(std::move(comps), s.name), sp};
    }
    d.add(*k, "unknown handle kind '" + kind + "'");
  } catch (const std::exception& e) {
    d.add(s, e.what());
  }
  return std::nullopt;
}

void build_handles(const ExperimentConfig& cfg, Workspace& ws, Diagnostics& d) {
  std::vector<const Section*> pending = cfg.of_type("handle");
  // join handles may name handles declared later; resolve until no progress
  for (bool progress = true; progress && !pending.empty();) {
    progress = false;
    std::vector<const Section*> still;
    for (const Section* s : pending) {
      bool deferred = false;
      auto h = build_handle(*s, ws, d, deferred);
      if (deferred) {
        still.push_back(s);
        continue;
      }
      progress = true;
      if (h) ws.handles.emplace(s->name, *h);
    }
    pending = std::move(still);
  }
  for (const Section* s : pending) {
    const Entry* c = s->find("components");
    std::string missing;
    for (const auto& name : split_list(c->value))
      if (!ws.handles.count(name)) missing = name;
    bool declared = cfg.find("handle", missing) != nullptr;
    d.add(*c, declared ? "join component '" + missing + "' is part of a cycle or invalid"
                       : "undeclared handle '" + missing + "'");
  }
}

Workspace build(const ExperimentConfig& cfg, Diagnostics& d, std::vector<std::string>* warnings) {
  Workspace ws;
  build_spaces(cfg, ws, d);
  build_towers(cfg, ws, d);
  build_potentials(cfg, ws, d, warnings);
  build_sets(cfg, ws, d);
  build_handles(cfg, ws, d);
  return ws;
}

ExperimentConfig parse_syntax(std::string_view text, Diagnostics& d) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::set<std::pair<std::string, std::string>> names;
  Section* current = nullptr;
  bool seen_header = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view line = trim(raw);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::size_t indent = static_cast<std::size_t>(line.data() - raw.data()) + 1;
    if (line.front() == '[') {
      current = nullptr;
      seen_header = true;
      if (line.back() != ']') {
        d.add(line_no, indent + line.size() - 1, "section header must end with ']'");
        continue;
      }
      auto parts = split_ws(line.substr(1, line.size() - 2));
      if (parts.empty() || parts.size() > 2) {
        d.add(line_no, indent, "expected [type] or [type name]");
        continue;
      }
      if (!kSectionTypes.count(parts[0])) {
        d.add(line_no, indent + 1, "unknown section type '" + parts[0] + "'");
        continue;
      }
      std::string name = parts.size() == 2 ? parts[1] : "";
      if (parts[0] == "global" ? !name.empty() : !valid_name(name)) {
        d.add(line_no, indent + 1,
              parts[0] == "global" ? "[global] takes no name" : "section [" + parts[0] + "] needs a name of letters, digits, '_', '-', '.'");
        continue;
      }
      if (!names.emplace(parts[0], name).second) {
        d.add(line_no, indent + 1, "duplicate section [" + parts[0] + (name.empty() ? "" : " " + name) + "]");
        continue;
      }
      cfg.sections.push_back(Section{parts[0], name, line_no, {}});
      current = &cfg.sections.back();
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      d.add(line_no, indent, "expected key = value");
      continue;
    }
    std::string key(trim(line.substr(0, eq)));
    if (!valid_name(key)) {
      d.add(line_no, indent, "invalid key '" + key + "'");
      continue;
    }
    if (!current) {
      // entries after a rejected header were already reported with it
      if (!seen_header) d.add(line_no, indent, "entry outside of any section");
      continue;
    }
    std::string_view after = line.substr(eq + 1);
    std::string_view value = trim(after);
    const std::size_t col = static_cast<std::size_t>(value.data() - raw.data()) + 1;
    current->entries.push_back(Entry{key, std::string(value), line_no, value.empty() ? indent + eq + 1 : col});
  }
  return cfg;
}

}  // namespace

const Entry* Section::find(std::string_view key) const {
  for (const auto& e : entries)
    if (e.key == key) return &e;
  return nullptr;
}

std::vector<const Entry*> Section::find_all(std::string_view key) const {
  std::vector<const Entry*> out;
  for (const auto& e : entries)
    if (e.key == key) out.push_back(&e);
  return out;
}

std::vector<const Section*> ExperimentConfig::of_type(std::string_view type) const {
  std::vector<const Section*> out;
  for (const auto& s : sections)
    if (s.type == type) out.push_back(&s);
  return out;
}

const Section* ExperimentConfig::find(std::string_view type, std::string_view name) const {
  for (const auto& s : sections)
    if (s.type == type && s.name == name) return &s;
  return nullptr;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& s : sections) {
    if (!out.empty()) out += '\n';
    out += "[" + s.type + (s.name.empty() ? "" : " " + s.name) + "]\n";
    for (const auto& e : s.entries) out += e.key + " = " + e.value + "\n";
  }
  return out;
}

std::string ExperimentConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ConfigError::ConfigError(std::vector<std::string> msgs)
    : Error([&] {
        std::string what = std::to_string(msgs.size()) + " configuration error(s)";
        for (const auto& m : msgs) what += "\n  " + m;
        return what;
      }()),
      messages(std::move(msgs)) {}

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    auto next = text.find(sep, pos);
    auto piece = trim(text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (piece.empty()) throw std::invalid_argument("empty item in list '" + std::string(text) + "'");
    out.emplace_back(piece);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

double parse_real(std::string_view text) { return parse_rational(text); }

std::uint64_t parse_unsigned(std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw std::invalid_argument("not a nonnegative integer: '" + std::string(text) + "'");
  return v;
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(text) + "'");
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) out.push_back(parse_real(s));
  return out;
}

ExperimentConfig parse_config(std::string_view text) {
  Diagnostics d;
  ExperimentConfig cfg = parse_syntax(text, d);
  for (const auto& s : cfg.sections) check_keys(s, d);

  if (const Section* g = cfg.find("global", "")) {
    if (const Entry* e = g->find("seed"))
      if (auto v = guarded(d, *e, [&] { return parse_unsigned(e->value); })) cfg.seed = *v;
    if (const Entry* e = g->find("tol"))
      if (auto v = guarded(d, *e, [&] { return parse_real(e->value); })) {
        if (*v > 0.0)
          cfg.tol = *v;
        else
          d.add(*e, "tol must be positive");
      }
  }

  Workspace ws = build(cfg, d, &cfg.warnings);
  try {
    runner::prepare_tasks(cfg, ws);
  } catch (const ConfigError& e) {
    d.messages.insert(d.messages.end(), e.messages.begin(), e.messages.end());
  }
  if (!d.messages.empty()) throw ConfigError(std::move(d.messages));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

Workspace build_workspace(const ExperimentConfig& config) {
  Diagnostics d;
  Workspace ws = build(config, d, nullptr);
  if (!d.messages.empty()) throw ConfigError(std::move(d.messages));
  return ws;
}

}  // namespace capacitylab::config
