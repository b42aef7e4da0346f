#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "capacitylab/errors.hpp"
#include "capacitylab/potential.hpp"

using namespace capacitylab;
using namespace capacitylab::potential;

namespace {

std::vector<double> random_nu(std::mt19937_64& rng, std::size_t m) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> nu(m);
  for (auto& v : nu) v = u(rng);
  return nu;
}

PointSet random_subset(std::mt19937_64& rng, std::size_t n, bool nonempty) {
  std::bernoulli_distribution coin(0.5);
  for (;;) {
    PointSet E(n);
    for (std::size_t i = 0; i < n; ++i)
      if (coin(rng)) E.insert(i);
    if (!nonempty || !E.empty()) return E;
  }
}

ExplicitMatrixKernel random_matrix(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ExplicitMatrixKernel k;
  k.rows.assign(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k.rows[i][j] = i == j ? 1.0 + u(rng) : u(rng) * u(rng);
  return k;
}

double nu_of(const std::vector<double>& nu, const PointSet& E) {
  double s = 0.0;
  for (auto i : E.indices()) s += nu[i];
  return s;
}

// Brute-force NNLS: best unconstrained least squares over every support
// whose solution is nonnegative.
Eigen::VectorXd nnls_by_supports(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  const auto n = A.cols();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(n);
  double best_r = b.squaredNorm();
  for (std::uint32_t s = 1; s < (1u << n); ++s) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < n; ++j)
      if (s >> j & 1) cols.push_back(j);
    Eigen::MatrixXd As(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) As.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    Eigen::VectorXd xs = As.colPivHouseholderQr().solve(b);
    if ((xs.array() < 0.0).any()) continue;
    const double r = (As * xs - b).squaredNorm();
    if (r < best_r) {
      best_r = r;
      best.setZero();
      for (std::size_t k = 0; k < cols.size(); ++k) best[cols[k]] = xs[static_cast<Eigen::Index>(k)];
    }
  }
  return best;
}

}  // namespace

TEST(CapacityGp, EmptySetIsZero) {
  const auto space = DiscretePotentialSpace::abstract({1.0, 2.0}, 2);
  const auto r = capacity_gp(space, DiagonalKernel{}, 2.0, PointSet(2), 1e-9);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.potential.f, (std::vector<double>{0.0, 0.0}));
}

TEST(CapacityGp, DiagonalKernelGivesMeasure) {
  std::mt19937_64 rng(43);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto nu = random_nu(rng, 8);
      const auto space = DiscretePotentialSpace::abstract(nu, 8);
      const PointSet E = random_subset(rng, 8, false);
      const auto r = capacity_gp(space, DiagonalKernel{}, p, E, 1e-9);
      EXPECT_NEAR(r.value, nu_of(nu, E), 1e-6);
      if (p > 1.0) {
        for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(r.potential.f[j], E.contains(j) ? 1.0 : 0.0, 1e-6);
      }
    }
  }
}

TEST(CapacityGp, ConstantKernelWithProbabilityIsOne) {
  std::mt19937_64 rng(47);
  for (double p : {1.5, 2.0, 3.0}) {
    auto nu = random_nu(rng, 6);
    double sum = 0.0;
    for (double v : nu) sum += v;
    for (auto& v : nu) v /= sum;
    const auto space = DiscretePotentialSpace::abstract(nu, 6);
    for (int trial = 0; trial < 5; ++trial) {
      const PointSet E = random_subset(rng, 6, true);
      EXPECT_NEAR(capacity_gp(space, ConstantKernel{1.0}, p, E, 1e-9).value, 1.0, 1e-6);
    }
  }
}

// One row of E has slack at the optimum; its multiplier must stay zero for
// the zero coordinates of f to certify.
TEST(CapacityGp, InactiveRowDoesNotBlockCertificate) {
  ExplicitMatrixKernel k{{{1.27, 0.0, 0.0}, {0.675, 0.533, 0.688}, {0.0, 0.0, 0.54}}};
  const auto space = DiscretePotentialSpace::abstract({0.467, 0.245, 1.242}, 3);
  const PotentialOperator op(space, k);
  const PointSet E = PointSet::from_mask(3, 0b110);
  const auto qp = capacity_qp(op, E);
  for (double tol : {1e-6, 1e-8, 1e-10}) {
    const auto r = capacity_gp(op, 2.0, E, tol);
    EXPECT_NEAR(r.value, qp.value, 10 * tol);
    EXPECT_EQ(r.potential.f[0], 0.0);
    EXPECT_EQ(r.potential.f[1], 0.0);
  }
}

TEST(CapacityGp, AgreesWithActiveSetRouteAtPTwo) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + trial % 5;
    const auto space = DiscretePotentialSpace::abstract(random_nu(rng, n), n);
    const PotentialOperator op(space, random_matrix(rng, n));
    const PointSet E = random_subset(rng, n, true);
    const auto gp = capacity_gp(op, 2.0, E, 1e-10);
    const auto qp = capacity_qp(op, E);
    EXPECT_NEAR(gp.value, qp.value, 1e-7 * std::max(1.0, qp.value));
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(gp.potential.f[j], qp.f[j], 1e-5);
  }
}

TEST(CapacityGp, CertificateWithinTolerance) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 4 + trial % 4;
    std::uniform_real_distribution<double> u(0.0, 4.0);
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
    const auto space = DiscretePotentialSpace::on_points(pts, random_nu(rng, n));
    const double p = trial % 3 == 0 ? 1.5 : trial % 3 == 1 ? 2.0 : 3.0;
    const double tol = 1e-8;
    const auto r = capacity_gp(space, RieszKernel{1.0, 2, 1.0, 10.0}, p, random_subset(rng, n, true), tol);
    const auto& c = r.certificate;
    EXPECT_LE(r.potential.kkt_residual, tol);
    EXPECT_LE(std::max({c.stationarity, c.complementarity, c.primal_infeasibility, c.duality_gap}), tol);
    for (double m : c.multipliers) EXPECT_GE(m, 0.0);
  }
}

TEST(CapacityGp, MonotoneAndSubadditive) {
  std::mt19937_64 rng(61);
  const double tol = 1e-8;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 5;
    const auto space = DiscretePotentialSpace::abstract(random_nu(rng, n), n);
    const PotentialOperator op(space, random_matrix(rng, n));
    const double p = 1.5 + (trial % 3) * 0.75;
    std::vector<double> c(1u << n);
    for (std::uint32_t m = 0; m < c.size(); ++m) c[m] = capacity_gp(op, p, PointSet::from_mask(n, m), tol).value;
    for (std::uint32_t a = 0; a < c.size(); ++a)
      for (std::uint32_t b = 0; b < c.size(); ++b) {
        if ((a & b) == a) {
          ASSERT_LE(c[a], c[b] + tol);
        }
        ASSERT_LE(c[a | b], c[a] + c[b] + tol);
      }
  }
}

TEST(CapacityGp, MinimizerDoesNotDependOnStart) {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6;
    const auto space = DiscretePotentialSpace::abstract(random_nu(rng, n), n);
    const PotentialOperator op(space, random_matrix(rng, n));
    const PointSet E = random_subset(rng, n, true);
    const double p = trial % 2 ? 2.0 : 3.0;
    SolverOptions other;
    other.start = std::vector<double>(n);
    for (auto& v : *other.start) v = u(rng);
    const auto a = capacity_gp(op, p, E, 1e-10);
    const auto b = capacity_gp(op, p, E, 1e-10, other);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(a.potential.f[j], b.potential.f[j], 1e-6);
  }
}

TEST(CapacityGp, ZeroRowIsInfeasible) {
  ExplicitMatrixKernel k{{{1.0, 0.0}, {0.0, 0.0}}};
  const auto space = DiscretePotentialSpace::abstract({1.0, 1.0}, 2);
  EXPECT_THROW(capacity_gp(space, k, 2.0, PointSet::from_mask(2, 0b10), 1e-8), Infeasible);
  EXPECT_THROW(capacity_qp(PotentialOperator(space, k), PointSet::from_mask(2, 0b10)), Infeasible);
  EXPECT_NO_THROW(capacity_gp(space, k, 2.0, PointSet::from_mask(2, 0b01), 1e-8));
}

TEST(CapacityGp, TraceRecordsEveryNewtonStep) {
  const auto space = DiscretePotentialSpace::on_points({{0.0}, {1.0}, {2.0}}, {1.0, 1.0, 1.0});
  SolverOptions opt;
  opt.record_trace = true;
  const auto r = capacity_gp(space, RieszKernel{0.5, 1, 1.0, 4.0}, 2.0, PointSet::from_mask(3, 0b101), 1e-8, opt);
  ASSERT_FALSE(r.trace.empty());
  EXPECT_GE(r.trace.size(), r.certificate.newton_steps);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i].barrier, r.trace[i - 1].barrier);
}

TEST(CapacityGp, RejectsBadArguments) {
  const auto space = DiscretePotentialSpace::abstract({1.0}, 1);
  EXPECT_THROW(capacity_gp(space, DiagonalKernel{}, 0.5, PointSet::full(1), 1e-8), std::invalid_argument);
  EXPECT_THROW(capacity_gp(space, DiagonalKernel{}, 2.0, PointSet::full(1), 0.0), std::invalid_argument);
  EXPECT_THROW(capacity_gp(space, DiagonalKernel{}, 2.0, PointSet::full(2), 1e-8), std::invalid_argument);
}

TEST(Nnls, MatchesSupportEnumeration) {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index rows = 3 + trial % 5, cols = 2 + trial % 4;
    Eigen::MatrixXd A(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      b[i] = g(rng);
      for (Eigen::Index j = 0; j < cols; ++j) A(i, j) = g(rng);
    }
    const Eigen::VectorXd x = nnls(A, b);
    const Eigen::VectorXd y = nnls_by_supports(A, b);
    EXPECT_GE(x.minCoeff(), 0.0);
    EXPECT_NEAR((A * x - b).norm(), (A * y - b).norm(), 1e-9);
  }
}

TEST(Tilde, DiagonalKernelKeepsTheSet) {
  std::mt19937_64 rng(73);
  const auto space = DiscretePotentialSpace::abstract(random_nu(rng, 6), 6);
  for (std::uint64_t m = 0; m < 64; ++m) {
    const PointSet A = PointSet::from_mask(6, m);
    EXPECT_EQ(potential_tilde(space, DiagonalKernel{}, 2.0, A, 1e-7), A);
  }
}

TEST(Tilde, ConstantKernelFillsEverything) {
  const auto space = DiscretePotentialSpace::abstract({0.25, 0.25, 0.5}, 3);
  EXPECT_EQ(potential_tilde(space, ConstantKernel{1.0}, 2.0, PointSet::from_mask(3, 0b001), 1e-7), PointSet::full(3));
  EXPECT_EQ(potential_tilde(space, ConstantKernel{1.0}, 2.0, PointSet(3), 1e-7), PointSet(3));
}

TEST(Stability, EqualSetsPass) {
  const auto space = DiscretePotentialSpace::abstract({1.0, 1.0, 1.0}, 3);
  const PointSet A = PointSet::from_mask(3, 0b011);
  const auto v = stability_biconditional(space, ExplicitMatrixKernel{{{1, 0.5, 0}, {0.5, 1, 0}, {0, 0.2, 1}}}, 2.0, A, A,
                                         1e-6);
  EXPECT_TRUE(v.passed());
  EXPECT_NEAR(v.c_b_minus_tilde, 0.0, 1e-12);
}

TEST(Stability, DiagonalStrictInclusion) {
  const std::vector<double> nu{0.3, 0.5, 0.7, 0.2};
  const auto space = DiscretePotentialSpace::abstract(nu, 4);
  const PointSet A = PointSet::from_mask(4, 0b0001), B = PointSet::from_mask(4, 0b0111);
  const auto v = stability_biconditional(space, DiagonalKernel{}, 2.0, A, B, 1e-6);
  EXPECT_NEAR(v.c_b_minus_tilde, 1.2, 1e-6);
  EXPECT_LT(v.c_a, v.c_b);
  EXPECT_TRUE(v.passed());
}

TEST(Stability, JudgeDirections) {
  EXPECT_TRUE(judge_stability(1.0, 1.0, 0.0, 1e-6).passed());
  EXPECT_FALSE(judge_stability(1.0, 2.0, 0.0, 1e-6).forward_pass);
  EXPECT_FALSE(judge_stability(1.0, 2.0, 0.0, 1e-6).backward_pass);
  EXPECT_TRUE(judge_stability(1.0, 1.0, 0.5, 1e-6).forward_pass);
}

TEST(Stability, ExhaustiveOnRandomMatrices) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 4;
    const auto space = DiscretePotentialSpace::abstract(random_nu(rng, n), n);
    const PotentialOperator op(space, random_matrix(rng, n));
    for (std::uint32_t b = 0; b < (1u << n); ++b)
      for (std::uint32_t a = b;; a = (a - 1) & b) {
        const auto v = stability_biconditional(op, 2.0, PointSet::from_mask(n, a), PointSet::from_mask(n, b), 1e-6);
        ASSERT_TRUE(v.passed()) << a << " " << b;
        if (a == 0) break;
      }
  }
}

TEST(Handle, PotentialCapacityHandle) {
  auto prob = std::make_shared<Problem>();
  prob->space = DiscretePotentialSpace::abstract({0.5, 1.5}, 2);
  prob->kernel = DiagonalKernel{};
  prob->p = 2.0;
  prob->tol = 1e-9;
  const auto h = make_handle(prob, "diag");
  EXPECT_NEAR(h(PointSet::full(2)), 2.0, 1e-6);
  EXPECT_EQ(h.context().potential, prob);
  EXPECT_TRUE(h.declared().monotone);
  EXPECT_FALSE(h.declared().strongly_subadditive);
}
