#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace capacitylab::potential {

using Point = std::vector<double>;

/// Finite measure space (M, nu) together with the points at which potentials
/// are evaluated. Coordinates are only needed by the radial kernels; the
/// coordinate lists may be left empty for Diagonal and ExplicitMatrix.
struct DiscretePotentialSpace {
  std::vector<Point> m_points;   // coordinates of M, or empty
  std::vector<double> nu;        // one positive weight per point of M
  std::vector<Point> x_points;   // coordinates of the evaluation points, or empty
  std::size_t x_count = 0;       // number of evaluation points

  std::size_t m_size() const { return nu.size(); }
  std::size_t x_size() const { return x_count; }

  // Throws std::invalid_argument when M is empty, a weight is not positive,
  // or coordinate lists have inconsistent sizes.
  void validate() const;

  // M and the evaluation points are the same coordinates (x_i = y_i).
  static DiscretePotentialSpace on_points(std::vector<Point> points, std::vector<double> nu);
  // Index-only space for Diagonal / ExplicitMatrix kernels.
  static DiscretePotentialSpace abstract(std::vector<double> nu, std::size_t x_count);
};

/// gamma * |x - y|^(alpha - n)
struct RieszKernel {
  double alpha = 2.0;
  int dim = 3;
  double gamma = 1.0;
  std::optional<double> k_max = 1e12;  // cap at coincident points; nullopt raises SingularKernel
};

/// a * int_0^inf t^((alpha-n)/2) exp(-pi |x|^2 / t - t / (4 pi)) dt / t,
/// by the trapezoid rule in u = log t.
struct BesselKernel {
  double alpha = 2.0;
  int dim = 3;
  double a = 1.0;
  double step = 0.25;          // trapezoid step in log t
  double tail_cutoff = 50.0;   // drop the tails where the log-integrand is this far below its peak
  std::optional<double> k_max = 1e12;
};

struct ConstantKernel {
  double value = 1.0;
};

/// g(x_i, y_j) = 1 / nu_j if i == j, else 0; the potential operator is the identity.
struct DiagonalKernel {};

/// rows[i][j] = g(x_i, y_j).
struct ExplicitMatrixKernel {
  std::vector<std::vector<double>> rows;
};

using Kernel = std::variant<RieszKernel, BesselKernel, ConstantKernel, DiagonalKernel, ExplicitMatrixKernel>;

std::string describe(const Kernel& kernel);

double riesz_value(double r, const RieszKernel& k);

// Value of the Bessel kernel at radius r with a caller-chosen trapezoid step.
double bessel_value(double r, const BesselKernel& k, double step);
inline double bessel_value(double r, const BesselKernel& k) { return bessel_value(r, k, k.step); }

/// g(x_i, y_j) for evaluation point i and point j of M.
double kernel_eval(const Kernel& kernel, const DiscretePotentialSpace& space, std::size_t i, std::size_t j);

struct KernelMatrix {
  Eigen::MatrixXd g;          // |X| x |M|
  std::size_t capped_entries = 0;
};

KernelMatrix kernel_matrix(const Kernel& kernel, const DiscretePotentialSpace& space);

}  // namespace capacitylab::potential
