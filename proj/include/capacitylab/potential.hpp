#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capacitylab/kernel.hpp"
#include "capacitylab/point_set.hpp"
#include "capacitylab/submeasure.hpp"

namespace capacitylab::potential {

/// A kernel capacity c_{g,p} on a discrete space.
struct Problem {
  DiscretePotentialSpace space;
  Kernel kernel;
  double p = 2.0;
  double tol = 1e-6;
};

/// The matrix of the potential operator, P(i, j) = g(x_i, y_j) nu_j, so that
/// Gf = P f.
class PotentialOperator {
 public:
  PotentialOperator(const DiscretePotentialSpace& space, const Kernel& kernel);

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const std::vector<double>& nu() const { return nu_; }
  std::size_t m_size() const { return nu_.size(); }
  std::size_t x_size() const { return static_cast<std::size_t>(matrix_.rows()); }
  std::size_t capped_entries() const { return capped_; }

  std::vector<double> apply(const std::vector<double>& f) const;

 private:
  Eigen::MatrixXd matrix_;
  std::vector<double> nu_;
  std::size_t capped_ = 0;
};

struct PotentialFunction {
  std::vector<double> f;
  double achieved_norm = 0.0;  // sum nu f^p
  double kkt_residual = 0.0;
};

struct KktCertificate {
  double stationarity = 0.0;          // sup norm of the Lagrangian gradient (bound multipliers chosen >= 0)
  double complementarity = 0.0;       // max multiplier * slack
  double primal_infeasibility = 0.0;  // max violation of Gf >= 1 on E and f >= 0
  double duality_gap = 0.0;           // bound on value - optimum
  std::vector<double> multipliers;    // one per point of E, in index order
  std::size_t newton_steps = 0;
  std::size_t outer_iterations = 0;
};

struct TraceRow {
  std::size_t iteration = 0;
  double objective = 0.0;
  double barrier = 0.0;  // barrier weight t
  double kkt_residual = 0.0;
};

struct CapacityResult {
  double value = 0.0;
  PotentialFunction potential;
  KktCertificate certificate;
  std::vector<TraceRow> trace;
};

struct SolverOptions {
  // Strictly positive starting point; rescaled until feasible.
  std::optional<std::vector<double>> start;
  std::size_t max_newton_steps = 5000;
  bool record_trace = false;
};

std::vector<double> apply_potential(const DiscretePotentialSpace& space, const Kernel& kernel,
                                    const std::vector<double>& f);

/// min sum nu f^p over {f >= 0 : Gf >= 1 on E} by a log-barrier method with
/// damped Newton steps. Throws Infeasible when a row of E is identically zero
/// and NoConvergence when the Newton budget runs out.
CapacityResult capacity_gp(const PotentialOperator& op, double p, const PointSet& E, double tol,
                           const SolverOptions& options = {});
CapacityResult capacity_gp(const DiscretePotentialSpace& space, const Kernel& kernel, double p,
                           const PointSet& E, double tol, const SolverOptions& options = {});

struct QpResult {
  double value = 0.0;
  std::vector<double> f;
};

/// p = 2 by an active-set method: the problem is a least-distance program in
/// g = sqrt(nu) f, solved through nonnegative least squares.
QpResult capacity_qp(const PotentialOperator& op, const PointSet& E);

/// Lawson-Hanson nonnegative least squares: argmin |A u - b| over u >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, std::size_t max_iterations = 0);

/// A union {x : G f_A(x) >= 1 - tol}.
PointSet potential_tilde(const PotentialOperator& op, double p, const PointSet& A, double tol);
PointSet potential_tilde(const DiscretePotentialSpace& space, const Kernel& kernel, double p, const PointSet& A,
                         double tol);
// Same, from an already computed potential function of A.
PointSet tilde_from_potential(const PotentialOperator& op, const PointSet& A, const std::vector<double>& f_A, double tol);

struct StabilityVerdict {
  double c_a = 0.0;
  double c_b = 0.0;
  double c_b_minus_tilde = 0.0;
  PointSet tilde_a;
  // c(B \ A~) <= tol  implies  |c(B) - c(A)| <= 10 tol
  bool forward_pass = true;
  // c(B) > c(A) + 10 tol  implies  c(B \ A~) > tol
  bool backward_pass = true;
  bool passed() const { return forward_pass && backward_pass; }
};

// Both implication directions for precomputed capacities.
StabilityVerdict judge_stability(double c_a, double c_b, double c_b_minus_tilde, double tol);

/// Checks that c(A) < c(B) exactly when c(B \ A~) > 0, with tolerances.
StabilityVerdict stability_biconditional(const PotentialOperator& op, double p, const PointSet& A, const PointSet& B,
                                         double tol);
StabilityVerdict stability_biconditional(const DiscretePotentialSpace& space, const Kernel& kernel, double p,
                                         const PointSet& A, const PointSet& B, double tol);

SubmeasureHandle make_handle(std::shared_ptr<const Problem> problem, std::string label = "potential");

}  // namespace capacitylab::potential
