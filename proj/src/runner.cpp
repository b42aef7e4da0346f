#include "capacitylab/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "capacitylab/errors.hpp"
#include "capacitylab/format.hpp"
#include "capacitylab/games.hpp"
#include "capacitylab/hausdorff.hpp"
#include "capacitylab/join.hpp"
#include "capacitylab/parallel.hpp"
#include "capacitylab/potential.hpp"
#include "capacitylab/steprans.hpp"
#include "capacitylab/verify.hpp"

namespace capacitylab::runner {

namespace {

using nlohmann::json;
using config::Entry;
using config::Section;
using config::Workspace;

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return round_significant(v);
}

std::string csv_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_report_real(v);
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

// Reads one task section, recording every problem.
class Params {
 public:
  Params(const Section& s, std::vector<std::string>& errors) : s_(s), errors_(errors) {}

  void error(const Entry& e, const std::string& msg) {
    errors_.push_back("line " + std::to_string(e.line) + ", column " + std::to_string(e.column) + ": " + e.key + ": " + msg);
    ok_ = false;
  }
  void error(const std::string& msg) {
    errors_.push_back("line " + std::to_string(s_.line) + ", column 1: [task " + s_.name + "] " + msg);
    ok_ = false;
  }
  bool ok() const { return ok_; }

  const Entry* get(const std::string& key, bool required) {
    used_.insert(key);
    auto all = s_.find_all(key);
    if (all.size() > 1) error(*all[1], "duplicate key");
    if (all.empty()) {
      if (required) error("missing required key '" + key + "'");
      return nullptr;
    }
    return all.front();
  }

  template <class F>
  auto parsed(const std::string& key, bool required, F&& f) -> std::optional<decltype(f(std::string()))> {
    const Entry* e = get(key, required);
    if (!e) return std::nullopt;
    try {
      return f(e->value);
    } catch (const std::exception& ex) {
      error(*e, ex.what());
      return std::nullopt;
    }
  }

  std::optional<std::string> text(const std::string& key, bool required) {
    const Entry* e = get(key, required);
    return e ? std::optional(e->value) : std::nullopt;
  }

  // A reference to a declared object of the given map.
  template <class Map>
  std::optional<std::string> ref(const std::string& key, bool required, const Map& m, const char* what) {
    const Entry* e = get(key, required);
    if (!e) return std::nullopt;
    if (!m.count(e->value)) {
      error(*e, std::string("undeclared ") + what + " '" + e->value + "'");
      return std::nullopt;
    }
    return e->value;
  }

  template <class Map>
  std::vector<std::string> refs(const std::string& key, bool required, const Map& m, const char* what) {
    const Entry* e = get(key, required);
    std::vector<std::string> out;
    if (!e) return out;
    try {
      for (const auto& name : config::split_list(e->value)) {
        if (!m.count(name))
          error(*e, std::string("undeclared ") + what + " '" + name + "'");
        else
          out.push_back(name);
      }
    } catch (const std::exception& ex) {
      error(*e, ex.what());
    }
    return out;
  }

  void finish() {
    for (const auto& e : s_.entries)
      if (!used_.count(e.key)) error(e, "not a parameter of task kind '" + kind() + "'");
  }

  std::string kind() const {
    const Entry* k = s_.find("kind");
    return k ? k->value : "";
  }
  const Section& section() const { return s_; }

 private:
  const Section& s_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_{"kind"};
  bool ok_ = true;
};

using Runner = std::function<void(const TaskContext&, TaskResult&)>;

// ---- capacity -------------------------------------------------------------

std::optional<Runner> prep_capacity(Params& P, const Workspace& ws) {
  auto handle = P.ref("handle", true, ws.handles, "handle");
  auto sets = P.refs("sets", true, ws.sets, "set");
  if (handle)
    for (const auto& s : sets)
      if (ws.sets.at(s).universe() != ws.handles.at(*handle).handle.universe())
        P.error("set '" + s + "' does not live on the universe of handle '" + *handle + "'");
  if (!P.ok()) return std::nullopt;
  return [h = *handle, sets](const TaskContext& ctx, TaskResult& r) {
    const auto& c = ctx.workspace.handles.at(h).handle;
    const auto& tower = c.context().tower;
    r.outputs["operation"] = "capacity";
    r.outputs["handle"] = h;
    json values = json::array();
    std::string csv = "set,members,value\n";
    for (const auto& name : sets) {
      const PointSet& A = ctx.workspace.sets.at(name);
      const double v = c(A);
      json row{{"set", name}, {"members", A.to_string()}, {"value", num(v)}};
      if (tower && tower->has_exact()) row["exact"] = steprans::capacity_exact(*tower, A).str();
      values.push_back(row);
      csv += name + "," + quote(A.to_string()) + "," + csv_real(v) + "\n";
      r.summary += "c(" + name + ") = " + csv_real(v) + "\n";
    }
    r.outputs["values"] = values;
    r.artifacts.emplace_back(r.id + ".csv", csv);
  };
}

// ---- join -----------------------------------------------------------------

std::optional<Runner> prep_join(Params& P, const Workspace& ws) {
  auto comps = P.refs("components", true, ws.handles, "handle");
  auto set = P.ref("set", true, ws.sets, "set");
  auto method = P.text("method", false).value_or("auto");
  if (method != "auto" && method != "exact" && method != "greedy") P.error(*P.get("method", false), "expected auto, exact or greedy");
  auto iterations = P.parsed("iterations", false, config::parse_unsigned).value_or(1000);
  if (set)
    for (const auto& h : comps)
      if (ws.handles.at(h).handle.universe() != ws.sets.at(*set).universe())
        P.error("handle '" + h + "' does not live on the universe of set '" + *set + "'");
  if (!P.ok()) return std::nullopt;
  return [comps, s = *set, method, iterations](const TaskContext& ctx, TaskResult& r) {
    std::vector<SubmeasureHandle> cs;
    for (const auto& h : comps) cs.push_back(ctx.workspace.handles.at(h).handle);
    const PointSet& A = ctx.workspace.sets.at(s);
    join::JoinResult res;
    if (method == "greedy") {
      res = join::join_greedy(cs, A, iterations, ctx.seed);
    } else {
      try {
        res = join::join_exact(cs, A);
      } catch (const UseGreedy&) {
        if (method == "exact") throw;
        res = join::join_greedy(cs, A, iterations, ctx.seed);
      }
    }
    r.outputs["operation"] = res.method == join::Method::exact ? "join_exact" : "join_greedy";
    r.outputs["set"] = s;
    r.outputs["value"] = num(res.value);
    r.outputs["method"] = join::to_string(res.method);
    json parts = json::array();
    std::string csv = "point,part,component\n";
    for (std::size_t m = 0; m < res.parts.size(); ++m) {
      parts.push_back(res.parts[m].indices());
      for (auto i : res.parts[m].indices()) csv += std::to_string(i) + "," + std::to_string(m) + "," + comps[m] + "\n";
    }
    r.outputs["parts"] = parts;
    r.outputs["components"] = comps;
    if (res.method == join::Method::exact) {
      auto nd = join::null_decompose(cs, A);
      if (nd) {
        json np = json::array();
        for (const auto& p : *nd) np.push_back(p.indices());
        r.outputs["null_decomposition"] = np;
      } else {
        r.outputs["null_decomposition"] = nullptr;
      }
    }
    r.artifacts.emplace_back(r.id + ".csv", csv);
    r.summary = "b(" + s + ") = " + csv_real(res.value) + " (" + join::to_string(res.method) + ")\n";
  };
}

// ---- tilde ----------------------------------------------------------------

std::optional<Runner> prep_tilde(Params& P, const Workspace& ws) {
  const bool has_tower = P.section().find("tower") != nullptr;
  const bool has_pot = P.section().find("potential") != nullptr;
  if (has_tower == has_pot) P.error("exactly one of tower=, potential= required");
  auto tower = has_tower ? P.ref("tower", true, ws.towers, "tower") : std::nullopt;
  auto pot = has_pot ? P.ref("potential", true, ws.potentials, "potential") : std::nullopt;
  auto set = P.ref("set", true, ws.sets, "set");
  auto grid = P.parsed("epsilons", false, [](const std::string& v) {
    auto g = config::parse_real_list(v);
    for (double e : g)
      if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("epsilons must lie in (0, 1)");
    return g;
  });
  if (has_pot && P.section().find("epsilons")) P.error("epsilons= applies to tower tilde sets only");
  if (set && tower && ws.sets.at(*set).universe() != ws.towers.at(*tower)->space().leaf_count())
    P.error("set '" + *set + "' is not a set of leaves of tower '" + *tower + "'");
  if (set && pot && ws.sets.at(*set).universe() != ws.potentials.at(*pot)->space.x_size())
    P.error("set '" + *set + "' is not a set of evaluation points of potential '" + *pot + "'");
  if (!P.ok()) return std::nullopt;
  const auto eps = grid.value_or(steprans::default_epsilon_grid());
  return [tower, pot, s = *set, eps](const TaskContext& ctx, TaskResult& r) {
    const PointSet& A = ctx.workspace.sets.at(s);
    r.outputs["set"] = s;
    if (tower) {
      steprans::DerivedCapacity cap{ctx.workspace.towers.at(*tower)};
      const auto res = steprans::tilde_steprans(cap, A, eps);
      r.outputs["operation"] = "tilde_steprans";
      r.outputs["tower"] = *tower;
      r.outputs["tilde"] = res.set.to_string();
      r.outputs["limit"] = res.limit.to_string();
      r.outputs["stable_from"] = res.stable_from;
      r.outputs["matches_limit"] = res.matches_limit;
      json eps_json = json::array();
      std::string csv = "epsilon,density_set,density_set_size,capacity_of_set,capacity_of_tilde\n";
      for (double e : eps) {
        const PointSet D = steprans::density_set(cap, A, e);
        eps_json.push_back(num(e));
        csv += csv_real(e) + "," + quote(D.to_string()) + "," + std::to_string(D.count()) + "," +
               csv_real(steprans::capacity(cap, A)) + "," + csv_real(steprans::capacity(cap, res.set)) + "\n";
      }
      r.outputs["epsilons"] = eps_json;
      r.outputs["capacity_of_set"] = num(steprans::capacity(cap, A));
      r.outputs["capacity_of_tilde"] = num(steprans::capacity(cap, res.set));
      r.artifacts.emplace_back(r.id + ".csv", csv);
      r.summary = "tilde(" + s + ") = " + res.set.to_string() + "\n";
    } else {
      const auto& prob = *ctx.workspace.potentials.at(*pot);
      potential::PotentialOperator op(prob.space, prob.kernel);
      const auto res = potential::capacity_gp(op, prob.p, A, prob.tol);
      const auto tilde = potential::tilde_from_potential(op, A, res.potential.f, prob.tol);
      const auto gf = op.apply(res.potential.f);
      r.outputs["operation"] = "potential_tilde";
      r.outputs["potential"] = *pot;
      r.outputs["tilde"] = tilde.to_string();
      r.outputs["capacity_of_set"] = num(res.value);
      std::string csv = "point,potential,in_set,in_tilde\n";
      json g = json::array();
      for (std::size_t i = 0; i < gf.size(); ++i) {
        g.push_back(num(gf[i]));
        csv += std::to_string(i) + "," + csv_real(gf[i]) + "," + (A.contains(i) ? "1" : "0") + "," +
               (tilde.contains(i) ? "1" : "0") + "\n";
      }
      r.outputs["potential_values"] = g;
      r.artifacts.emplace_back(r.id + ".csv", csv);
      r.summary = "tilde(" + s + ") = " + tilde.to_string() + "\n";
    }
  };
}

// ---- hausdorff ------------------------------------------------------------

std::optional<Runner> prep_hausdorff(Params& P, const Workspace& ws) {
  auto space = P.ref("space", true, ws.spaces, "space");
  auto set = P.ref("set", true, ws.sets, "set");
  auto s = P.parsed("s", true, [](const std::string& v) {
    double x = config::parse_real(v);
    if (!(x > 0.0) || !std::isfinite(x)) throw std::invalid_argument("s must be a positive real");
    return x;
  });
  auto deltas = P.parsed("deltas", true, [](const std::string& v) {
    auto d = config::parse_real_list(v);
    if (d.empty()) throw std::invalid_argument("at least one delta required");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(d[i] > 0.0)) throw std::invalid_argument("deltas must be positive");
      if (i && !(d[i] < d[i - 1])) throw std::invalid_argument("deltas must strictly decrease");
    }
    return d;
  });
  if (space && set && ws.sets.at(*set).universe() != ws.spaces.at(*space).space.leaf_count())
    P.error("set '" + *set + "' is not a set of leaves of space '" + *space + "'");
  if (!P.ok()) return std::nullopt;
  return [sp = *space, st = *set, s = *s, deltas = *deltas](const TaskContext& ctx, TaskResult& r) {
    const auto& entry = ctx.workspace.spaces.at(sp);
    const auto prof = hausdorff::premeasure_profile(entry.space, entry.metric, ctx.workspace.sets.at(st), s, deltas);
    r.outputs["operation"] = "premeasure_profile";
    r.outputs["space"] = sp;
    r.outputs["set"] = st;
    r.outputs["s"] = num(s);
    json rows = json::array();
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      json cover = json::array();
      for (const auto& t : prof[i].optimal_cover.opens) cover.push_back(to_string(t));
      rows.push_back({{"delta", num(deltas[i])}, {"value", num(prof[i].value)}, {"cover", cover}});
      r.summary += "delta " + csv_real(deltas[i]) + ": " + csv_real(prof[i].value) + "\n";
    }
    r.outputs["profile"] = rows;
    std::ostringstream csv;
    hausdorff::write_profile_csv(csv, deltas, prof);
    r.artifacts.emplace_back(r.id + ".csv", csv.str());
  };
}

// ---- game -----------------------------------------------------------------

std::optional<std::string> game_space(Params& P, const Workspace& ws, const std::optional<std::string>& handle) {
  if (P.section().find("space")) return P.ref("space", true, ws.spaces, "space");
  if (handle && ws.handles.at(*handle).space) return ws.handles.at(*handle).space;
  P.get("space", true);
  return std::nullopt;
}

std::optional<Runner> prep_game(Params& P, const Workspace& ws) {
  auto handle = P.ref("handle", true, ws.handles, "handle");
  auto space = game_space(P, ws, handle);
  const std::string mode = P.text("mode", false).value_or("solve");
  auto wait = P.parsed("wait", false, [](const std::string& v) {
    auto w = config::parse_unsigned(v);
    if (w == 0 || w > 60) throw std::invalid_argument("wait must lie in [1, 60]");
    return static_cast<std::size_t>(w);
  });
  auto positive = [](const std::string& v) {
    double e = config::parse_real(v);
    if (!(e > 0.0)) throw std::invalid_argument("epsilon must be positive");
    return e;
  };
  std::optional<std::string> target;
  std::optional<double> epsilon;
  std::vector<double> grid;
  bool dump = false;
  if (mode == "solve") {
    target = P.ref("target", true, ws.sets, "set");
    epsilon = P.parsed("epsilon", true, positive);
    dump = P.parsed("strategy", false, config::parse_bool).value_or(false);
  } else if (mode == "lemma") {
    grid = P.parsed("epsilons", false, [&](const std::string& v) {
             std::vector<double> g;
             for (const auto& s : config::split_list(v)) g.push_back(positive(s));
             return g;
           }).value_or(std::vector<double>{});
    if (grid.empty())
      for (int k = 1; k <= 8; ++k) grid.push_back(k / 8.0);
  } else {
    P.error(*P.get("mode", false), "expected solve or lemma");
  }
  if (space && handle) {
    const auto& sp = ws.spaces.at(*space).space;
    if (ws.handles.at(*handle).handle.universe() != sp.leaf_count())
      P.error("handle '" + *handle + "' does not live on the leaves of space '" + *space + "'");
    const std::size_t limit = mode == "lemma" ? 8 : games::kMaxLeaves;
    if (sp.leaf_count() > limit)
      P.error("space '" + *space + "' has " + std::to_string(sp.leaf_count()) + " leaves; the game allows " +
              std::to_string(limit));
    if (target && ws.sets.at(*target).universe() != sp.leaf_count())
      P.error("target '" + *target + "' is not a set of leaves of space '" + *space + "'");
  }
  if (!P.ok()) return std::nullopt;
  return [h = *handle, sp = *space, mode, wait, target, epsilon, grid, dump](const TaskContext& ctx, TaskResult& r) {
    const auto& c = ctx.workspace.handles.at(h).handle;
    const auto& space = ctx.workspace.spaces.at(sp).space;
    r.outputs["handle"] = h;
    r.outputs["space"] = sp;
    if (mode == "solve") {
      games::TruncatedGameH game{space, c, ctx.workspace.sets.at(*target), *epsilon, wait};
      const auto out = games::solve_minimax(game);
      const bool replayed = games::replay_strategy(game, out);
      r.outputs["operation"] = "solve_minimax";
      r.outputs["target"] = *target;
      r.outputs["epsilon"] = num(*epsilon);
      r.outputs["capacity_of_target"] = num(c(game.target));
      r.outputs["winner"] = games::to_string(out.winner);
      r.outputs["positions_explored"] = out.positions_explored;
      r.outputs["wait_rounds"] = out.wait_rounds;
      r.outputs["strategy_size"] = out.strategy.size();
      r.outputs["replayed"] = replayed;
      if (dump) {
        json st = json::array();
        for (const auto& [pos, move] : out.strategy) {
          const std::size_t revealed = pos.stage == 0 ? 0 : std::min<std::size_t>((pos.stage - 1) / 2, space.depth());
          json move_json;
          if (pos.stage == 0 || pos.stage % 2 == 1)
            move_json = PointSet::from_mask(space.leaf_count(), move).to_string();
          else
            move_json = move;
          st.push_back({{"stage", pos.stage},
                        {"prefix", to_string(space.node_at(revealed, pos.prefix_rank))},
                        {"covered", PointSet::from_mask(space.leaf_count(), pos.covered).to_string()},
                        {"cap", num(pos.cap)},
                        {"move", move_json}});
        }
        r.outputs["strategy"] = st;
      }
      if (!replayed) {
        r.status = "failed";
        r.error = "strategy replay failed";
      }
      r.summary = "winner " + games::to_string(out.winner) + " (c(B) = " + csv_real(c(game.target)) +
                  ", eps = " + csv_real(*epsilon) + ")\n";
    } else {
      const auto rep = games::verify_gamelemma(space, c, grid, true, wait);
      r.outputs["operation"] = "verify_gamelemma";
      json g = json::array();
      for (double e : grid) g.push_back(num(e));
      r.outputs["epsilons"] = g;
      r.outputs["cells"] = rep.cells.size();
      r.outputs["forward_violations"] = rep.forward_violations.size();
      r.outputs["backward_violations"] = rep.backward_violations.size();
      r.outputs["boundary_cells"] = rep.boundary_cells;
      r.outputs["boundary_player_one_wins"] = rep.boundary_player_one_wins;
      r.outputs["replay_failures"] = rep.replay_failures;
      r.outputs["passed"] = rep.passed();
      std::string csv = "target,epsilon,capacity,winner,replayed\n";
      for (const auto& cell : rep.cells)
        csv += quote(PointSet::from_mask(space.leaf_count(), cell.target).to_string()) + "," + csv_real(cell.epsilon) +
               "," + csv_real(cell.capacity) + "," + games::to_string(cell.winner) + "," +
               (cell.replayed ? "1" : "0") + "\n";
      r.artifacts.emplace_back(r.id + ".csv", csv);
      if (!rep.passed()) {
        r.status = "failed";
        r.error = "covering lemma violated or strategy replay failed";
      }
      r.summary = std::to_string(rep.cells.size()) + " cells, " + std::to_string(rep.forward_violations.size()) +
                  " forward and " + std::to_string(rep.backward_violations.size()) + " backward violations\n";
    }
  };
}

// ---- verify ---------------------------------------------------------------

std::optional<Runner> prep_verify(Params& P, const Workspace& ws) {
  auto handle = P.ref("handle", true, ws.handles, "handle");
  auto names = [&](const char* key, bool required) {
    return P.parsed(key, required, [](const std::string& v) {
              std::vector<verify::Property> out;
              for (const auto& n : config::split_list(v)) {
                auto p = verify::property_from_string(n);
                if (!p) throw std::invalid_argument("unknown property '" + n + "'");
                out.push_back(*p);
              }
              return out;
            }).value_or(std::vector<verify::Property>{});
  };
  const auto asserted = names("properties", false);
  const auto explored = names("explore", false);
  if (!P.section().find("properties") && !P.section().find("explore")) P.error("properties= or explore= required");
  const std::string mode = P.text("mode", false).value_or("exhaustive");
  if (mode != "exhaustive" && mode != "randomized") P.error(*P.get("mode", false), "expected exhaustive or randomized");
  auto trials = P.parsed("trials", false, config::parse_unsigned);
  auto tol = P.parsed("tolerance", false, [](const std::string& v) {
    double t = config::parse_real(v);
    if (!(t >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
    return t;
  });
  auto grid = P.parsed("epsilons", false, config::parse_real_list);
  if (!P.ok()) return std::nullopt;
  return [h = *handle, asserted, explored, mode, trials, tol, grid](const TaskContext& ctx, TaskResult& r) {
    const auto& entry = ctx.workspace.handles.at(h);
    std::vector<verify::PropertySpec> specs;
    auto add = [&](verify::Property p) {
      verify::PropertySpec s;
      s.name = p;
      s.mode = mode == "exhaustive" ? verify::Mode::exhaustive : verify::Mode::randomized;
      if (trials) s.trials = *trials;
      s.seed = ctx.seed;
      if (tol) s.tolerance = *tol;
      if (grid) s.epsilon_grid = *grid;
      specs.push_back(s);
    };
    for (auto p : asserted) add(p);
    for (auto p : explored) add(p);
    std::optional<ProductTreeSpace> sp;
    if (entry.space) sp = ctx.workspace.spaces.at(*entry.space).space;
    const auto rep = verify::run_suite(entry.handle, specs, sp);
    json report = rep.to_json(false);
    std::string csv = "property,asserted,mode,verdict,cases,max_deviation\n";
    bool failed = false;
    for (std::size_t i = 0; i < rep.results.size(); ++i) {
      const bool is_asserted = i < asserted.size();
      const auto& res = rep.results[i];
      report["properties"][i]["asserted"] = is_asserted;
      if (is_asserted && res.verdict == verify::Verdict::fail) failed = true;
      csv += verify::to_string(res.spec.name) + "," + (is_asserted ? "1" : "0") + "," + verify::to_string(res.spec.mode) +
             "," + verify::to_string(res.verdict) + "," + std::to_string(res.cases) + "," + csv_real(res.max_deviation) +
             "\n";
    }
    r.outputs["operation"] = "run_suite";
    r.outputs["report"] = json::parse(report.dump());
    r.artifacts.emplace_back(r.id + ".csv", csv);
    r.summary = rep.to_table();
    if (failed) {
      r.status = "failed";
      r.error = "an asserted property failed";
    }
  };
}

// ---- potential ------------------------------------------------------------

std::optional<Runner> prep_potential(Params& P, const Workspace& ws) {
  auto pot = P.ref("potential", true, ws.potentials, "potential");
  auto sets = P.refs("sets", true, ws.sets, "set");
  const bool trace = P.parsed("trace", false, config::parse_bool).value_or(false);
  std::vector<std::pair<std::string, std::string>> pairs;
  if (const Entry* e = P.get("stability", false)) {
    try {
      for (const auto& item : config::split_list(e->value)) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("expected A:B pairs");
        std::string a = item.substr(0, colon), b = item.substr(colon + 1);
        for (const auto& n : {a, b})
          if (!ws.sets.count(n)) throw std::invalid_argument("undeclared set '" + n + "'");
        if (!ws.sets.at(a).is_subset_of(ws.sets.at(b))) throw std::invalid_argument("set '" + a + "' is not inside '" + b + "'");
        pairs.emplace_back(a, b);
      }
    } catch (const std::exception& ex) {
      P.error(*e, ex.what());
    }
  }
  if (pot) {
    const std::size_t n = ws.potentials.at(*pot)->space.x_size();
    for (const auto& s : sets)
      if (ws.sets.at(s).universe() != n)
        P.error("set '" + s + "' is not a set of evaluation points of potential '" + *pot + "'");
    for (const auto& [a, b] : pairs)
      if (ws.sets.at(a).universe() != n) P.error("set '" + a + "' is not a set of evaluation points of potential '" + *pot + "'");
  }
  if (!P.ok()) return std::nullopt;
  return [pot = *pot, sets, trace, pairs](const TaskContext& ctx, TaskResult& r) {
    const auto& prob = *ctx.workspace.potentials.at(pot);
    potential::PotentialOperator op(prob.space, prob.kernel);
    r.outputs["operation"] = "capacity_gp";
    r.outputs["potential"] = pot;
    r.outputs["p"] = num(prob.p);
    r.outputs["kernel"] = potential::describe(prob.kernel);
    json values = json::array();
    std::string csv = "set,members,value,kkt_residual,newton_steps\n";
    for (const auto& name : sets) {
      const PointSet& E = ctx.workspace.sets.at(name);
      potential::SolverOptions opt;
      opt.record_trace = trace;
      const auto res = potential::capacity_gp(op, prob.p, E, prob.tol, opt);
      json f = json::array();
      for (double v : res.potential.f) f.push_back(num(v));
      json mult = json::array();
      for (double v : res.certificate.multipliers) mult.push_back(num(v));
      values.push_back({{"set", name},
                        {"members", E.to_string()},
                        {"value", num(res.value)},
                        {"f", f},
                        {"kkt_residual", num(res.potential.kkt_residual)},
                        {"certificate",
                         {{"stationarity", num(res.certificate.stationarity)},
                          {"complementarity", num(res.certificate.complementarity)},
                          {"primal_infeasibility", num(res.certificate.primal_infeasibility)},
                          {"duality_gap", num(res.certificate.duality_gap)},
                          {"multipliers", mult},
                          {"newton_steps", res.certificate.newton_steps},
                          {"outer_iterations", res.certificate.outer_iterations}}}});
      csv += name + "," + quote(E.to_string()) + "," + csv_real(res.value) + "," + csv_real(res.potential.kkt_residual) +
             "," + std::to_string(res.certificate.newton_steps) + "\n";
      r.summary += "c_gp(" + name + ") = " + csv_real(res.value) + "\n";
      if (trace) {
        std::string t = "iteration,objective,barrier,kkt_residual\n";
        for (const auto& row : res.trace)
          t += std::to_string(row.iteration) + "," + csv_real(row.objective) + "," + csv_real(row.barrier) + "," +
               csv_real(row.kkt_residual) + "\n";
        r.artifacts.emplace_back(r.id + "_trace_" + name + ".csv", t);
      }
    }
    r.outputs["values"] = values;
    json stab = json::array();
    bool failed = false;
    for (const auto& [a, b] : pairs) {
      const auto v = potential::stability_biconditional(op, prob.p, ctx.workspace.sets.at(a), ctx.workspace.sets.at(b), prob.tol);
      stab.push_back({{"a", a},
                      {"b", b},
                      {"c_a", num(v.c_a)},
                      {"c_b", num(v.c_b)},
                      {"c_b_minus_tilde", num(v.c_b_minus_tilde)},
                      {"tilde_a", v.tilde_a.to_string()},
                      {"forward_pass", v.forward_pass},
                      {"backward_pass", v.backward_pass}});
      failed |= !v.passed();
    }
    if (!pairs.empty()) r.outputs["stability"] = stab;
    r.artifacts.emplace_back(r.id + ".csv", csv);
    if (failed) {
      r.status = "failed";
      r.error = "stability biconditional failed";
    }
  };
}

const std::map<std::string, std::optional<Runner> (*)(Params&, const Workspace&)>& task_kinds() {
  static const std::map<std::string, std::optional<Runner> (*)(Params&, const Workspace&)> kinds{
      {"capacity", prep_capacity}, {"join", prep_join},     {"tilde", prep_tilde},         {"hausdorff", prep_hausdorff},
      {"game", prep_game},         {"verify", prep_verify}, {"potential", prep_potential},
  };
  return kinds;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
}

}  // namespace

std::vector<PreparedTask> prepare_tasks(const config::ExperimentConfig& cfg, const Workspace& ws) {
  std::vector<std::string> errors;
  std::vector<PreparedTask> out;
  for (const Section* s : cfg.of_type("task")) {
    Params P(*s, errors);
    const Entry* k = P.get("kind", true);
    if (!k) continue;
    auto it = task_kinds().find(k->value);
    if (it == task_kinds().end()) {
      P.error(*k, "unknown task kind '" + k->value + "'");
      continue;
    }
    auto runner = it->second(P, ws);
    P.finish();
    if (!runner || !P.ok()) continue;
    out.push_back(PreparedTask{s->name, k->value, [run = *runner, id = s->name, kind = k->value](const TaskContext& ctx) {
                                 TaskResult r;
                                 r.id = id;
                                 r.kind = kind;
                                 run(ctx, r);
                                 return r;
                               }});
  }
  if (!errors.empty()) throw config::ConfigError(std::move(errors));
  return out;
}

std::uint64_t task_seed(std::uint64_t global_seed, const std::string& task_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : task_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer
  std::uint64_t z = global_seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int RunReport::exit_code() const {
  for (const auto& t : tasks)
    if (t.status != "ok") return 1;
  return 0;
}

std::string RunReport::deterministic_json() const {
  nlohmann::json j = report;
  j.erase("timing");
  return j.dump(2) + "\n";
}

std::string RunReport::json() const { return report.dump(2) + "\n"; }

RunReport run(const config::ExperimentConfig& cfg, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Workspace ws = config::build_workspace(cfg);
  auto prepared = prepare_tasks(cfg, ws);
  if (!options.kinds.empty())
    std::erase_if(prepared, [&](const PreparedTask& t) { return !options.kinds.count(t.kind); });
  const std::uint64_t seed = options.seed.value_or(cfg.seed);

  RunReport rep;
  rep.tasks.resize(prepared.size());
  auto run_one = [&](std::size_t i) {
    const auto& t = prepared[i];
    const auto t0 = std::chrono::steady_clock::now();
    TaskResult r;
    try {
      r = t.run(TaskContext{cfg, ws, task_seed(seed, t.id)});
    } catch (const std::exception& e) {
      r = TaskResult{};
      r.id = t.id;
      r.kind = t.kind;
      r.status = "error";
      r.error = e.what();
      r.summary = std::string("error: ") + e.what() + "\n";
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.tasks[i] = std::move(r);
  };
  if (options.parallel)
    parallel_for(prepared.size(), run_one);
  else
    for (std::size_t i = 0; i < prepared.size(); ++i) run_one(i);

  nlohmann::json& j = rep.report;
  j["schema"] = kReportSchema;
  j["tool"] = {{"name", "capacitylab"}, {"version", CAPACITYLAB_VERSION}};
  j["config_digest"] = cfg.digest();
  j["seed"] = seed;
  j["warnings"] = cfg.warnings;
  j["tasks"] = nlohmann::json::array();
  std::size_t ok = 0, failed = 0, errors = 0;
  for (const auto& t : rep.tasks) {
    nlohmann::json tj{{"id", t.id}, {"kind", t.kind}, {"status", t.status}, {"outputs", t.outputs}};
    if (!t.error.empty()) tj["error"] = t.error;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, text] : t.artifacts) files.push_back(name);
    tj["artifacts"] = files;
    j["tasks"].push_back(tj);
    (t.status == "ok" ? ok : t.status == "failed" ? failed : errors)++;
  }
  j["summary"] = {{"tasks", rep.tasks.size()}, {"ok", ok}, {"failed", failed}, {"errors", errors}};
  nlohmann::json timing;
  for (const auto& t : rep.tasks) timing["tasks"][t.id] = t.seconds;
  timing["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  j["timing"] = timing;

  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    write_file(*options.out_dir / "report.json", rep.json());
    for (const auto& t : rep.tasks)
      for (const auto& [name, text] : t.artifacts) write_file(*options.out_dir / name, text);
  }
  return rep;
}

}  // namespace capacitylab::runner
