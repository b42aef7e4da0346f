#include "capacitylab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "capacitylab/errors.hpp"

namespace capacitylab::potential {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Fraction of the way to the boundary a damped step may go.
constexpr double kStepToBoundary = 0.99;
constexpr double kArmijo = 0.25;
constexpr double kBarrierGrowth = 10.0;
constexpr double kCenteringTol = 1e-14;  // on lambda^2 / 2
constexpr double kMinGapFactor = 1e-4;

struct BarrierState {
  const MatrixXd& A;  // rows of P on E
  const VectorXd& nu;
  double p;
  double t;

  double objective(const VectorXd& f) const { return (nu.array() * f.array().pow(p)).sum(); }

  // +inf outside the domain
  double value(const VectorXd& f) const {
    if ((f.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    VectorXd s = A * f - VectorXd::Ones(A.rows());
    if ((s.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
    return t * objective(f) - s.array().log().sum() - f.array().log().sum();
  }
};

double max_step(const VectorXd& x, const VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (Index k = 0; k < x.size(); ++k)
    if (dx[k] < 0.0) a = std::min(a, -x[k] / dx[k]);
  return a;
}

}  // namespace

PotentialOperator::PotentialOperator(const DiscretePotentialSpace& space, const Kernel& kernel) : nu_(space.nu) {
  auto km = kernel_matrix(kernel, space);
  capped_ = km.capped_entries;
  matrix_ = km.g;
  for (Index j = 0; j < matrix_.cols(); ++j) matrix_.col(j) *= nu_[static_cast<std::size_t>(j)];
}

std::vector<double> PotentialOperator::apply(const std::vector<double>& f) const {
  if (f.size() != m_size()) throw std::invalid_argument("apply_potential: f must have one value per point of M");
  VectorXd v = matrix_ * Eigen::Map<const VectorXd>(f.data(), static_cast<Index>(f.size()));
  return {v.data(), v.data() + v.size()};
}

std::vector<double> apply_potential(const DiscretePotentialSpace& space, const Kernel& kernel,
                                    const std::vector<double>& f) {
  for (double v : f)
    if (v < 0.0) throw std::invalid_argument("apply_potential: f must be nonnegative");
  return PotentialOperator(space, kernel).apply(f);
}

CapacityResult capacity_gp(const PotentialOperator& op, double p, const PointSet& E, double tol,
                           const SolverOptions& options) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("capacity_gp: p must be a finite real >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("capacity_gp: tol must be positive");
  if (E.universe() != op.x_size()) throw std::invalid_argument("capacity_gp: E is not a set of evaluation points");

  const std::size_t m = op.m_size();
  CapacityResult result;
  if (E.empty()) {
    result.potential.f.assign(m, 0.0);
    return result;
  }

  const auto rows = E.indices();
  MatrixXd A(static_cast<Index>(rows.size()), static_cast<Index>(m));
  for (std::size_t r = 0; r < rows.size(); ++r) A.row(static_cast<Index>(r)) = op.matrix().row(static_cast<Index>(rows[r]));
  for (Index r = 0; r < A.rows(); ++r)
    if (A.row(r).maxCoeff() <= 0.0)
      throw Infeasible("capacity_gp: the potential vanishes identically at evaluation point " +
                       std::to_string(rows[static_cast<std::size_t>(r)]));
  const VectorXd nu = Eigen::Map<const VectorXd>(op.nu().data(), static_cast<Index>(m));

  // strictly feasible start
  VectorXd f = VectorXd::Ones(static_cast<Index>(m));
  if (options.start) {
    if (options.start->size() != m) throw std::invalid_argument("capacity_gp: start has the wrong length");
    f = Eigen::Map<const VectorXd>(options.start->data(), static_cast<Index>(m));
    if ((f.array() <= 0.0).any()) throw std::invalid_argument("capacity_gp: start must be strictly positive");
  }
  {
    const double lo = (A * f).minCoeff();
    if (lo <= 1.0) f *= 2.0 / lo;
  }

  const double constraints = static_cast<double>(A.rows()) + static_cast<double>(m);
  BarrierState bar{A, nu, p, constraints / std::max(1e-12, (nu.array() * f.array().pow(p)).sum())};
  // stop once the barrier duality bound is below tol with margin
  const double gap_target = 0.1 * tol;

  std::size_t steps = 0;
  std::size_t outer = 0;
  double stationarity = 0.0;
  auto kkt_now = [&](const VectorXd& grad) {
    stationarity = (grad / bar.t).cwiseAbs().maxCoeff();
    return std::max(stationarity, constraints / bar.t);
  };

  // Multipliers on Gf >= 1: 1/(t s) loses digits when s is tiny, so fit
  // grad = A^T lambda, lambda >= 0, over the nearly active rows on the clearly
  // positive coordinates of f.
  // The bound multipliers then take the dual feasible choice
  // max(0, grad - A^T lambda).
  auto certify = [&](const VectorXd& x) {
    KktCertificate cert;
    const VectorXd s = A * x - VectorXd::Ones(A.rows());
    const VectorXd objective_grad = p * (nu.array() * x.array().pow(p - 1.0)).matrix();
    VectorXd lambda = (bar.t * s.array()).inverse().matrix();
    std::vector<Index> free;
    for (Index j = 0; j < x.size(); ++j)
      if (x[j] > 1.0 / std::sqrt(bar.t)) free.push_back(j);
    // rows with slack keep the tiny barrier estimate
    std::vector<Index> active;
    for (Index i = 0; i < A.rows(); ++i)
      if (s[i] <= 1.0 / std::sqrt(bar.t)) active.push_back(i);
    if (!free.empty() && !active.empty()) {
      MatrixXd At(static_cast<Index>(free.size()), static_cast<Index>(active.size()));
      VectorXd b(static_cast<Index>(free.size()));
      for (std::size_t k = 0; k < free.size(); ++k) {
        for (std::size_t i = 0; i < active.size(); ++i)
          At(static_cast<Index>(k), static_cast<Index>(i)) = A(active[i], free[k]);
        b[static_cast<Index>(k)] = objective_grad[free[k]];
      }
      const VectorXd fitted = nnls(At, b);
      for (std::size_t i = 0; i < active.size(); ++i) lambda[active[i]] = fitted[static_cast<Index>(i)];
    }
    const VectorXd g = objective_grad - A.transpose() * lambda;
    const VectorXd mu = g.cwiseMax(0.0);
    cert.stationarity = std::max(0.0, -g.minCoeff());
    cert.complementarity =
        std::max((lambda.array() * s.array()).abs().maxCoeff(), (mu.array() * x.array()).abs().maxCoeff());
    cert.primal_infeasibility = std::max(0.0, std::max(-s.minCoeff(), -x.minCoeff()));
    cert.duality_gap = constraints / bar.t;
    cert.multipliers.assign(lambda.data(), lambda.data() + lambda.size());
    cert.newton_steps = steps;
    cert.outer_iterations = outer;
    return cert;
  };
  auto residual_of = [](const KktCertificate& c) {
    return std::max({c.stationarity, c.complementarity, c.primal_infeasibility, c.duality_gap});
  };


  // The central path keeps every coordinate positive. Drop the ones held up
  // only by the f >= 0 barrier when the result stays feasible and certified.
  auto finish = [&](VectorXd& x) {
    KktCertificate cert = certify(x);
    const VectorXd pull = A.transpose() * (A * x - VectorXd::Ones(A.rows())).cwiseInverse();
    VectorXd polished = x;
    for (Index j = 0; j < x.size(); ++j)
      if (x[j] * pull[j] < 1.0) polished[j] = 0.0;
    if (polished != x && ((A * polished).array() >= 1.0).all()) {
      KktCertificate polished_cert = certify(polished);
      if (residual_of(polished_cert) <= tol) {
        x = polished;
        cert = std::move(polished_cert);
      }
    }
    return cert;
  };

  for (;;) {
    ++outer;
    // centering
    for (;;) {
      VectorXd s = A * f - VectorXd::Ones(A.rows());
      VectorXd inv_s = s.cwiseInverse();
      VectorXd inv_f = f.cwiseInverse();
      VectorXd grad = bar.t * p * (nu.array() * f.array().pow(p - 1.0)).matrix() - A.transpose() * inv_s - inv_f;
      MatrixXd H = A.transpose() * inv_s.cwiseAbs2().asDiagonal() * A;
      H.diagonal() += inv_f.cwiseAbs2();
      if (p > 1.0) H.diagonal() += (bar.t * p * (p - 1.0) * (nu.array() * f.array().pow(p - 2.0))).matrix();

      // symmetric Jacobi scaling before the factorization
      VectorXd d = H.diagonal().cwiseSqrt().cwiseInverse();
      MatrixXd Hs = d.asDiagonal() * H * d.asDiagonal();
      VectorXd rhs = -(d.asDiagonal() * grad);
      Eigen::LDLT<MatrixXd> ldlt(Hs);
      VectorXd step = d.asDiagonal() * ldlt.solve(rhs);
      const double decrement = -grad.dot(step);

      if (options.record_trace)
        result.trace.push_back(TraceRow{steps, bar.objective(f), bar.t, kkt_now(grad)});

      const double current = bar.value(f);
      if (!(decrement >= 0.0) || decrement / 2.0 <= kCenteringTol) {
        kkt_now(grad);
        break;
      }
      if (++steps > options.max_newton_steps) {
        std::vector<double> best(f.data(), f.data() + f.size());
        throw NoConvergence("capacity_gp: Newton budget exhausted", std::move(best), kkt_now(grad));
      }

      double alpha = std::min(1.0, kStepToBoundary * std::min(max_step(f, step), max_step(s, A * step)));
      while (alpha > 1e-20 && !(bar.value(f + alpha * step) <= current - kArmijo * alpha * decrement)) alpha *= 0.5;
      if (alpha <= 1e-20) break;  // no further progress at this barrier weight
      const VectorXd next = f + alpha * step;
      // stalled at rounding level
      if (next == f || !(bar.value(next) < current)) break;
      f = next;
    }
    if (constraints / bar.t <= gap_target) {
      // past the gap target, keep tightening until the certificate holds
      VectorXd probe = f;
      if (residual_of(finish(probe)) <= tol || constraints / bar.t <= kMinGapFactor * tol) break;
    }
    bar.t *= kBarrierGrowth;
  }

  VectorXd final_f = f;
  KktCertificate cert = finish(final_f);
  f = final_f;
  result.certificate = cert;

  const double residual = residual_of(cert);
  std::vector<double> fv(f.data(), f.data() + f.size());
  if (residual > tol) throw NoConvergence("capacity_gp: KKT residual above tolerance", std::move(fv), residual);

  result.value = bar.objective(f);
  result.potential = PotentialFunction{std::move(fv), result.value, residual};
  return result;
}

CapacityResult capacity_gp(const DiscretePotentialSpace& space, const Kernel& kernel, double p, const PointSet& E,
                           double tol, const SolverOptions& options) {
  return capacity_gp(PotentialOperator(space, kernel), p, E, tol, options);
}

Eigen::VectorXd nnls(const MatrixXd& A, const VectorXd& b, std::size_t max_iterations) {
  const Index n = A.cols();
  if (max_iterations == 0) max_iterations = static_cast<std::size_t>(3 * n + 10);
  const double eps = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max(1.0, b.cwiseAbs().maxCoeff());

  VectorXd x = VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  auto solve_passive = [&](VectorXd& z) {
    std::vector<Index> cols;
    for (Index j = 0; j < n; ++j)
      if (passive[static_cast<std::size_t>(j)]) cols.push_back(j);
    MatrixXd Ap(A.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) Ap.col(static_cast<Index>(k)) = A.col(cols[k]);
    VectorXd zp = Ap.colPivHouseholderQr().solve(b);
    z = VectorXd::Zero(n);
    for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zp[static_cast<Index>(k)];
  };

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    VectorXd w = A.transpose() * (b - A * x);
    Index best = -1;
    double best_w = eps;
    for (Index j = 0; j < n; ++j)
      if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
        best_w = w[j];
        best = j;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (;;) {
      VectorXd z;
      solve_passive(z);
      bool positive = true;
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) positive = false;
      if (positive) {
        x = z;
        break;
      }
      double alpha = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) alpha = std::min(alpha, x[j] / (x[j] - z[j]));
      x += alpha * (z - x);
      for (Index j = 0; j < n; ++j)
        if (passive[static_cast<std::size_t>(j)] && x[j] <= eps) {
          passive[static_cast<std::size_t>(j)] = false;
          x[j] = 0.0;
        }
    }
  }
  return x;
}

QpResult capacity_qp(const PotentialOperator& op, const PointSet& E) {
  if (E.universe() != op.x_size()) throw std::invalid_argument("capacity_qp: E is not a set of evaluation points");
  const std::size_t m = op.m_size();
  QpResult out;
  out.f.assign(m, 0.0);
  if (E.empty()) return out;

  // constraints G g >= h with g = sqrt(nu) f: rows of P on E, then g >= 0
  const auto rows = E.indices();
  const Index q = static_cast<Index>(rows.size() + m);
  MatrixXd G = MatrixXd::Zero(q, static_cast<Index>(m));
  VectorXd h = VectorXd::Zero(q);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < m; ++j)
      G(static_cast<Index>(r), static_cast<Index>(j)) =
          op.matrix()(static_cast<Index>(rows[r]), static_cast<Index>(j)) / std::sqrt(op.nu()[j]);
    h[static_cast<Index>(r)] = 1.0;
  }
  for (std::size_t j = 0; j < m; ++j) G(static_cast<Index>(rows.size() + j), static_cast<Index>(j)) = 1.0;

  // least distance program via NNLS on [G^T; h^T] u ~ e_last
  MatrixXd Ebig(static_cast<Index>(m) + 1, q);
  Ebig.topRows(static_cast<Index>(m)) = G.transpose();
  Ebig.bottomRows(1) = h.transpose();
  VectorXd target = VectorXd::Zero(static_cast<Index>(m) + 1);
  target[static_cast<Index>(m)] = 1.0;
  VectorXd u = nnls(Ebig, target);
  VectorXd r = Ebig * u - target;
  if (r.norm() < 1e-12) throw Infeasible("capacity_qp: constraints are incompatible");
  const double last = r[static_cast<Index>(m)];
  for (std::size_t j = 0; j < m; ++j) {
    double g = -r[static_cast<Index>(j)] / last;
    out.f[j] = std::max(0.0, g) / std::sqrt(op.nu()[j]);
    out.value += op.nu()[j] * out.f[j] * out.f[j];
  }
  return out;
}

PointSet tilde_from_potential(const PotentialOperator& op, const PointSet& A, const std::vector<double>& f_A, double tol) {
  auto gf = op.apply(f_A);
  PointSet out = A;
  for (std::size_t i = 0; i < gf.size(); ++i)
    if (gf[i] >= 1.0 - tol) out.insert(i);
  return out;
}

PointSet potential_tilde(const PotentialOperator& op, double p, const PointSet& A, double tol) {
  auto res = capacity_gp(op, p, A, tol);
  return tilde_from_potential(op, A, res.potential.f, tol);
}

PointSet potential_tilde(const DiscretePotentialSpace& space, const Kernel& kernel, double p, const PointSet& A,
                         double tol) {
  return potential_tilde(PotentialOperator(space, kernel), p, A, tol);
}

StabilityVerdict judge_stability(double c_a, double c_b, double c_b_minus_tilde, double tol) {
  StabilityVerdict v;
  v.c_a = c_a;
  v.c_b = c_b;
  v.c_b_minus_tilde = c_b_minus_tilde;
  if (c_b_minus_tilde <= tol) v.forward_pass = std::abs(c_b - c_a) <= 10.0 * tol;
  if (c_b > c_a + 10.0 * tol) v.backward_pass = c_b_minus_tilde > tol;
  return v;
}

StabilityVerdict stability_biconditional(const PotentialOperator& op, double p, const PointSet& A, const PointSet& B,
                                         double tol) {
  if (!A.is_subset_of(B)) throw std::invalid_argument("stability_biconditional: A must be a subset of B");
  auto res_a = capacity_gp(op, p, A, tol);
  auto tilde = tilde_from_potential(op, A, res_a.potential.f, tol);
  const double c_b = capacity_gp(op, p, B, tol).value;
  const double c_rest = capacity_gp(op, p, B - tilde, tol).value;
  auto v = judge_stability(res_a.value, c_b, c_rest, tol);
  v.tilde_a = std::move(tilde);
  return v;
}

StabilityVerdict stability_biconditional(const DiscretePotentialSpace& space, const Kernel& kernel, double p,
                                         const PointSet& A, const PointSet& B, double tol) {
  return stability_biconditional(PotentialOperator(space, kernel), p, A, B, tol);
}

SubmeasureHandle make_handle(std::shared_ptr<const Problem> problem, std::string label) {
  if (!problem) throw std::invalid_argument("make_handle: null problem");
  auto op = std::make_shared<const PotentialOperator>(problem->space, problem->kernel);
  HandleContext ctx;
  ctx.potential = problem;
  const double p = problem->p;
  const double tol = problem->tol;
  return SubmeasureHandle(
      std::move(label), problem->space.x_size(),
      [op, p, tol](const PointSet& E) { return capacity_gp(*op, p, E, tol).value; },
      DeclaredProperties{true, true, false}, std::move(ctx));
}

}  // namespace capacitylab::potential
