#include "capacitylab/games.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "capacitylab/errors.hpp"
#include "capacitylab/parallel.hpp"

namespace capacitylab::games {

namespace {

constexpr double kTol = 1e-12;

std::size_t default_wait(const std::vector<double>& values) {
  std::vector<double> v = values;
  std::sort(v.begin(), v.end());
  double gap = INFINITY;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] - v[i - 1] > kTol) gap = std::min(gap, v[i] - v[i - 1]);
  std::size_t w = 1;
  while (std::ldexp(1.0, -static_cast<int>(w - 1)) >= gap) ++w;
  return w;
}

std::vector<double> table_of(const SubmeasureHandle& c, std::size_t leaves) {
  std::vector<double> out(std::size_t{1} << leaves);
  for (std::uint32_t m = 0; m < out.size(); ++m) out[m] = c(PointSet::from_mask(leaves, m));
  return out;
}

}  // namespace

std::string to_string(Player p) { return p == Player::I ? "I" : "II"; }

std::size_t PositionHash::operator()(const Position& p) const noexcept {
  std::size_t h = std::hash<double>{}(p.cap);
  for (std::size_t v : {p.stage, p.prefix_rank, static_cast<std::size_t>(p.covered)})
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

GameSolver::GameSolver(const ProductTreeSpace& space, std::vector<double> capacity_by_mask, double epsilon,
                       std::optional<std::size_t> wait_rounds)
    : space_(space), values_(std::move(capacity_by_mask)), epsilon_(epsilon), leaves_(space.leaf_count()) {
  if (leaves_ > kMaxLeaves) throw TooLarge("game: more than " + std::to_string(kMaxLeaves) + " leaves");
  if (values_.size() != (std::size_t{1} << leaves_)) throw std::invalid_argument("game: one capacity per leaf set expected");
  if (!(epsilon > 0.0)) throw std::invalid_argument("game: epsilon must be positive");
  if (wait_rounds && *wait_rounds == 0) throw std::invalid_argument("game: wait_rounds must be at least 1");
  wait_ = wait_rounds ? *wait_rounds : default_wait(values_);

  const std::size_t targets = std::size_t{1} << leaves_;
  words_ = (targets + 63) / 64;
  full_.assign(words_, 0);
  for (std::size_t b = 0; b < targets; ++b) full_[b >> 6] |= std::uint64_t{1} << (b & 63);
  without_leaf_.assign(leaves_, Family(words_, 0));
  for (std::size_t x = 0; x < leaves_; ++x)
    for (std::size_t b = 0; b < targets; ++b)
      if (!((b >> x) & 1U)) without_leaf_[x][b >> 6] |= std::uint64_t{1} << (b & 63);
}

std::vector<std::pair<std::uint32_t, Position>> GameSolver::player_one_moves(const Position& p) const {
  const std::size_t round = p.stage == 0 ? wait_ - 1 : wait_ + (p.stage - 1) / 2;
  const std::uint32_t all = static_cast<std::uint32_t>((std::uint64_t{1} << leaves_) - 1);
  const std::uint32_t free = all & ~p.covered;
  std::vector<std::pair<std::uint32_t, Position>> out;
  // supersets of covered, in increasing order
  std::vector<std::uint32_t> subs;
  for (std::uint32_t s = free;; s = (s - 1) & free) {
    subs.push_back(s);
    if (s == 0) break;
  }
  std::reverse(subs.begin(), subs.end());
  for (std::uint32_t s : subs) {
    const std::uint32_t next = p.covered | s;
    const double c = values_[next];
    if (c > p.cap + kTol) continue;
    Position q{p.stage + 1, p.prefix_rank, next, std::min(p.cap, c + std::ldexp(1.0, -static_cast<int>(round)))};
    out.emplace_back(next, q);
  }
  return out;
}

std::vector<Position> GameSolver::player_two_moves(const Position& p) const {
  const std::size_t i = (p.stage - 2) / 2;
  std::vector<Position> out;
  for (std::size_t c = 0; c < space_.arity(i); ++c)
    out.push_back(Position{p.stage + 1, p.prefix_rank * space_.arity(i) + c, p.covered, p.cap});
  return out;
}

const GameSolver::Family& GameSolver::family(const Position& p) {
  if (auto it = memo_.find(p); it != memo_.end()) return it->second;
  Family f(words_, 0);
  const std::size_t final_stage = 2 * depth() + 1;
  if (p.stage == final_stage) {
    const std::size_t x = leaf_of(p);
    f = without_leaf_[x];
    for (const auto& [mask, q] : player_one_moves(p))
      if ((mask >> x) & 1U) {
        f = full_;
        break;
      }
  } else if (player_one_to_move(p)) {
    for (const auto& [mask, q] : player_one_moves(p)) {
      const Family& g = family(q);
      for (std::size_t w = 0; w < words_; ++w) f[w] |= g[w];
      if (f == full_) break;
    }
  } else {
    f = full_;
    for (const auto& q : player_two_moves(p)) {
      const Family& g = family(q);
      for (std::size_t w = 0; w < words_; ++w) f[w] &= g[w];
    }
  }
  return memo_.emplace(p, std::move(f)).first->second;
}

bool GameSolver::player_one_wins(std::uint32_t target) { return contains(family(opening()), target); }

GameOutcome GameSolver::solve(std::uint32_t target) {
  GameOutcome out;
  out.wait_rounds = wait_;
  out.winner = player_one_wins(target) ? Player::I : Player::II;
  const std::size_t final_stage = 2 * depth() + 1;

  // walk the positions reachable under the winner's strategy
  std::vector<Position> stack{opening()};
  std::map<Position, bool> seen;
  while (!stack.empty()) {
    Position p = stack.back();
    stack.pop_back();
    if (terminal_stage(p) || !seen.emplace(p, true).second) continue;
    if (player_one_to_move(p)) {
      auto moves = player_one_moves(p);
      if (out.winner == Player::I) {
        for (const auto& [mask, q] : moves) {
          const bool wins = p.stage == final_stage ? (!((target >> leaf_of(p)) & 1U) || ((mask >> leaf_of(p)) & 1U))
                                                   : contains(family(q), target);
          if (wins) {
            out.strategy[p] = mask;
            stack.push_back(q);
            break;
          }
        }
      } else {
        for (const auto& [mask, q] : moves) stack.push_back(q);
      }
    } else {
      auto children = player_two_moves(p);
      if (out.winner == Player::II) {
        for (std::size_t c = 0; c < children.size(); ++c)
          if (!contains(family(children[c]), target)) {
            out.strategy[p] = static_cast<std::uint32_t>(c);
            stack.push_back(children[c]);
            break;
          }
      } else {
        for (const auto& q : children) stack.push_back(q);
      }
    }
  }
  out.positions_explored = memo_.size();
  return out;
}

GameOutcome solve_minimax(const TruncatedGameH& game) {
  if (game.space.leaf_count() > kMaxLeaves) throw TooLarge("game: more than " + std::to_string(kMaxLeaves) + " leaves");
  if (game.capacity.universe() != game.space.leaf_count() || game.target.universe() != game.space.leaf_count())
    throw std::invalid_argument("game: capacity and target must live on the leaves of the space");
  GameSolver solver(game.space, table_of(game.capacity, game.space.leaf_count()), game.epsilon, game.wait_rounds);
  return solver.solve(static_cast<std::uint32_t>(game.target.to_mask()));
}

bool replay_strategy(const GameSolver& solver, std::uint32_t target, const GameOutcome& outcome) {
  std::map<Position, bool> memo;
  // true iff every line from p ends in the declared winner's favor
  auto play = [&](auto&& self, const Position& p) -> bool {
    if (solver.terminal_stage(p)) {
      const std::size_t x = solver.leaf_of(p);
      const bool two_wins = ((target >> x) & 1U) && !((p.covered >> x) & 1U);
      return (outcome.winner == Player::II) == two_wins;
    }
    if (auto it = memo.find(p); it != memo.end()) return it->second;
    bool ok = true;
    const bool one_moves = solver.player_one_to_move(p);
    const bool winner_moves = one_moves == (outcome.winner == Player::I);
    if (winner_moves) {
      auto it = outcome.strategy.find(p);
      if (it == outcome.strategy.end()) {
        ok = false;
      } else if (one_moves) {
        ok = false;
        for (const auto& [mask, q] : solver.player_one_moves(p))
          if (mask == it->second) {
            ok = self(self, q);
            break;
          }
      } else {
        auto children = solver.player_two_moves(p);
        ok = it->second < children.size() && self(self, children[it->second]);
      }
    } else if (one_moves) {
      for (const auto& [mask, q] : solver.player_one_moves(p))
        if (!(ok = self(self, q))) break;
    } else {
      for (const auto& q : solver.player_two_moves(p))
        if (!(ok = self(self, q))) break;
    }
    memo.emplace(p, ok);
    return ok;
  };
  return play(play, solver.opening());
}

bool replay_strategy(const TruncatedGameH& game, const GameOutcome& outcome) {
  GameSolver solver(game.space, table_of(game.capacity, game.space.leaf_count()), game.epsilon,
                    game.wait_rounds ? game.wait_rounds : std::optional<std::size_t>(outcome.wait_rounds));
  return replay_strategy(solver, static_cast<std::uint32_t>(game.target.to_mask()), outcome);
}

GameLemmaReport verify_gamelemma(const ProductTreeSpace& space, const SubmeasureHandle& capacity,
                                 std::span<const double> epsilon_grid, bool replay,
                                 std::optional<std::size_t> wait_rounds) {
  constexpr std::size_t kMaxLemmaLeaves = 8;
  const std::size_t n = space.leaf_count();
  if (n > kMaxLemmaLeaves) throw TooLarge("verify_gamelemma: more than 8 leaves");
  if (capacity.universe() != n) throw std::invalid_argument("verify_gamelemma: capacity must live on the leaves");
  const auto values = table_of(capacity, n);
  const std::size_t targets = std::size_t{1} << n;

  std::vector<std::vector<GameCell>> per_eps(epsilon_grid.size());
  parallel_for(epsilon_grid.size(), [&](std::size_t e) {
    GameSolver solver(space, values, epsilon_grid[e], wait_rounds);
    auto& cells = per_eps[e];
    cells.reserve(targets);
    for (std::uint32_t b = 0; b < targets; ++b) {
      GameCell cell{b, epsilon_grid[e], values[b], Player::II, false};
      if (replay) {
        auto outcome = solver.solve(b);
        cell.winner = outcome.winner;
        cell.replayed = replay_strategy(solver, b, outcome);
      } else {
        cell.winner = solver.player_one_wins(b) ? Player::I : Player::II;
      }
      cells.push_back(cell);
    }
  });

  GameLemmaReport report;
  for (auto& cells : per_eps)
    for (auto& cell : cells) {
      if (cell.capacity < cell.epsilon - kTol && cell.winner != Player::I) report.forward_violations.push_back(cell);
      if (cell.winner == Player::I && cell.capacity > cell.epsilon + kTol) report.backward_violations.push_back(cell);
      if (std::abs(cell.capacity - cell.epsilon) <= kTol) {
        ++report.boundary_cells;
        if (cell.winner == Player::I) ++report.boundary_player_one_wins;
      }
      if (replay && !cell.replayed) ++report.replay_failures;
      report.cells.push_back(cell);
    }
  return report;
}

}  // namespace capacitylab::games
