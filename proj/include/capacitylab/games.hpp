#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "capacitylab/point_set.hpp"
#include "capacitylab/space.hpp"
#include "capacitylab/submeasure.hpp"

namespace capacitylab::games {

enum class Player { I, II };

std::string to_string(Player p);

constexpr std::size_t kMaxLeaves = 12;

/// Finite version of the covering game H(B, eps) on a product tree.
///
/// Player I builds an increasing chain of sets A(k) with c(A(k)) <= eps and
/// the pacing rule c(A(k1)) - c(A(k0)) <= 2^-k0. Player II may wait before
/// revealing coordinates; II waits wait_rounds rounds and then reveals one
/// coordinate per round (extra waiting later only tightens I's budget, and
/// once 2^-k is below every capacity gap it changes nothing). I's moves
/// while II waits carry no information and merge into one opening move.
///
/// Schedule, by stage:
///   0          I opens with A_0 (round wait_rounds - 1)
///   2i + 1     I extends A knowing coordinates 0..i-1 (round wait_rounds + i)
///   2i + 2     II reveals coordinate i
///   2d + 1     I's last extension, knowing the leaf
/// II wins iff the leaf lies in B \ A.
struct TruncatedGameH {
  ProductTreeSpace space;
  SubmeasureHandle capacity;
  PointSet target;
  double epsilon = 0.0;
  // nullopt: the smallest W >= 1 with 2^-(W-1) below the smallest positive
  // gap between capacity values of the space.
  std::optional<std::size_t> wait_rounds;
};

/// A game position. prefix_rank is the rank of II's revealed prefix among
/// nodes of its length; covered is I's current set as a leaf mask; cap is
/// the largest capacity I may still reach.
struct Position {
  std::size_t stage = 0;
  std::size_t prefix_rank = 0;
  std::uint32_t covered = 0;
  double cap = 0.0;

  auto operator<=>(const Position&) const = default;
  bool operator==(const Position&) const = default;
};

struct PositionHash {
  std::size_t operator()(const Position& p) const noexcept;
};

struct GameOutcome {
  Player winner = Player::II;
  // Winner's move at every position reachable when the winner follows it:
  // a leaf mask for Player I, a coordinate value for Player II.
  std::map<Position, std::uint32_t> strategy;
  std::size_t positions_explored = 0;
  std::size_t wait_rounds = 0;
};

/// Win sets of the game for every target B at once, for one capacity table
/// and one eps. family(pos) is the set of targets (as a 2^N-bit bitset over
/// leaf masks) for which Player I wins from pos.
class GameSolver {
 public:
  GameSolver(const ProductTreeSpace& space, std::vector<double> capacity_by_mask, double epsilon,
             std::optional<std::size_t> wait_rounds = std::nullopt);

  std::size_t leaves() const { return leaves_; }
  std::size_t depth() const { return space_.depth(); }
  std::size_t wait_rounds() const { return wait_; }
  double epsilon() const { return epsilon_; }
  const ProductTreeSpace& space() const { return space_; }
  double capacity(std::uint32_t mask) const { return values_[mask]; }

  bool player_one_wins(std::uint32_t target);
  std::size_t positions_explored() const { return memo_.size(); }

  // Exact minimax for one target, with the winner's strategy.
  GameOutcome solve(std::uint32_t target);

  Position opening() const { return Position{0, 0, 0, epsilon_}; }
  bool player_one_to_move(const Position& p) const { return p.stage % 2 == 1 || p.stage == 0; }
  bool terminal_stage(const Position& p) const { return p.stage > 2 * depth() + 1; }

  // Legal extensions for Player I, in increasing mask order, with the
  // position they lead to.
  std::vector<std::pair<std::uint32_t, Position>> player_one_moves(const Position& p) const;
  // Positions after each of II's coordinate choices.
  std::vector<Position> player_two_moves(const Position& p) const;
  // Leaf fixed by a terminal position.
  std::size_t leaf_of(const Position& p) const { return p.prefix_rank; }

 private:
  using Family = std::vector<std::uint64_t>;
  const Family& family(const Position& p);
  bool contains(const Family& f, std::uint32_t target) const { return (f[target >> 6] >> (target & 63)) & 1U; }

  ProductTreeSpace space_;
  std::vector<double> values_;
  double epsilon_;
  std::size_t leaves_;
  std::size_t wait_;
  std::size_t words_;
  Family full_;
  std::vector<Family> without_leaf_;  // targets not containing the leaf
  std::unordered_map<Position, Family, PositionHash> memo_;
};

/// Exact minimax for one game. Throws TooLarge beyond kMaxLeaves leaves.
GameOutcome solve_minimax(const TruncatedGameH& game);

/// Plays the declared winner's strategy against every line of the other
/// player, checking legality of every strategy move, and reports whether
/// all lines end in the declared winner's favor.
bool replay_strategy(const GameSolver& solver, std::uint32_t target, const GameOutcome& outcome);
bool replay_strategy(const TruncatedGameH& game, const GameOutcome& outcome);

struct GameCell {
  std::uint32_t target = 0;
  double epsilon = 0.0;
  double capacity = 0.0;
  Player winner = Player::II;
  bool replayed = false;
};

struct GameLemmaReport {
  std::vector<GameCell> cells;
  // c(B) < eps but Player II wins
  std::vector<GameCell> forward_violations;
  // Player I wins but c(B) > eps
  std::vector<GameCell> backward_violations;
  std::size_t boundary_cells = 0;  // c(B) = eps
  std::size_t boundary_player_one_wins = 0;
  std::size_t replay_failures = 0;
  bool passed() const { return forward_violations.empty() && backward_violations.empty() && replay_failures == 0; }
};

/// Both implications of the covering lemma over every target B and every eps
/// of the grid, with optional strategy replay on every cell. Throws
/// TooLarge beyond 8 leaves.
GameLemmaReport verify_gamelemma(const ProductTreeSpace& space, const SubmeasureHandle& capacity,
                                 std::span<const double> epsilon_grid, bool replay = true,
                                 std::optional<std::size_t> wait_rounds = std::nullopt);

}  // namespace capacitylab::games
