#include "capacitylab/kernel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "capacitylab/errors.hpp"
#include "capacitylab/format.hpp"

namespace capacitylab::potential {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double distance(const Point& x, const Point& y) {
  if (x.size() != y.size()) throw std::invalid_argument("kernel: points of different dimension");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
  return std::sqrt(s);
}

const Point& coords(const std::vector<Point>& pts, std::size_t i, const char* which) {
  if (i >= pts.size()) throw std::invalid_argument(std::string("kernel: no coordinates for ") + which + " point");
  return pts[i];
}

}  // namespace

void DiscretePotentialSpace::validate() const {
  if (nu.empty()) throw std::invalid_argument("potential space: M is empty");
  for (double w : nu)
    if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("potential space: nu weights must be positive");
  if (!m_points.empty() && m_points.size() != nu.size())
    throw std::invalid_argument("potential space: one coordinate per point of M expected");
  if (!x_points.empty() && x_points.size() != x_count)
    throw std::invalid_argument("potential space: one coordinate per evaluation point expected");
}

DiscretePotentialSpace DiscretePotentialSpace::on_points(std::vector<Point> points, std::vector<double> nu) {
  DiscretePotentialSpace s;
  s.x_count = points.size();
  s.x_points = points;
  s.m_points = std::move(points);
  s.nu = std::move(nu);
  s.validate();
  return s;
}

DiscretePotentialSpace DiscretePotentialSpace::abstract(std::vector<double> nu, std::size_t x_count) {
  DiscretePotentialSpace s;
  s.nu = std::move(nu);
  s.x_count = x_count;
  s.validate();
  return s;
}

std::string describe(const Kernel& kernel) {
  return std::visit(
      overloaded{[](const RieszKernel& k) {
                   return "riesz alpha=" + format_real(k.alpha) + " n=" + std::to_string(k.dim) +
                          " gamma=" + format_real(k.gamma) + (k.k_max ? " kmax=" + format_real(*k.k_max) : "");
                 },
                 [](const BesselKernel& k) {
                   return "bessel alpha=" + format_real(k.alpha) + " n=" + std::to_string(k.dim) + " a=" + format_real(k.a) +
                          " step=" + format_real(k.step) + (k.k_max ? " kmax=" + format_real(*k.k_max) : "");
                 },
                 [](const ConstantKernel& k) { return "constant value=" + format_real(k.value); },
                 [](const DiagonalKernel&) { return std::string("diagonal"); },
                 [](const ExplicitMatrixKernel& k) {
                   std::string out = "matrix rows=";
                   for (std::size_t i = 0; i < k.rows.size(); ++i) {
                     if (i) out += ';';
                     for (std::size_t j = 0; j < k.rows[i].size(); ++j) {
                       if (j) out += ',';
                       out += format_real(k.rows[i][j]);
                     }
                   }
                   return out;
                 }},
      kernel);
}

double riesz_value(double r, const RieszKernel& k) {
  if (!(k.alpha > 0.0 && k.alpha < k.dim)) throw std::invalid_argument("riesz: need 0 < alpha < n");
  if (r == 0.0) {
    if (!k.k_max) throw SingularKernel("riesz kernel at coincident points with no cap");
    return *k.k_max;
  }
  double v = k.gamma * std::pow(r, k.alpha - k.dim);
  return k.k_max ? std::min(v, *k.k_max) : v;
}

double bessel_value(double r, const BesselKernel& k, double step) {
  using std::numbers::pi;
  if (!(k.alpha > 0.0)) throw std::invalid_argument("bessel: need alpha > 0");
  if (!(step > 0.0)) throw std::invalid_argument("bessel: step must be positive");
  const double nu = (k.alpha - k.dim) / 2.0;
  if (r == 0.0 && nu <= 0.0) {
    if (!k.k_max) throw SingularKernel("bessel kernel at coincident points with no cap");
    return *k.k_max;
  }
  // log-integrand in u = log t; concave, peak where its derivative vanishes
  const double r2 = r * r;
  auto phi = [&](double u) { return nu * u - pi * r2 * std::exp(-u) - std::exp(u) / (4.0 * pi); };
  const double root = std::sqrt(nu * nu + r2);
  // nu + root, written without cancellation when nu < 0
  const double z = 2.0 * pi * (nu >= 0.0 ? nu + root : r2 / (root - nu));
  const double peak_u = std::log(z);
  const double peak = phi(peak_u);

  double sum = 1.0;  // the peak node
  for (int dir : {-1, 1}) {
    for (long j = 1;; ++j) {
      double u = peak_u + dir * static_cast<double>(j) * step;
      double d = phi(u) - peak;
      if (d < -k.tail_cutoff) break;
      sum += std::exp(d);
    }
  }
  double v = k.a * step * sum * std::exp(peak);
  return k.k_max ? std::min(v, *k.k_max) : v;
}

double kernel_eval(const Kernel& kernel, const DiscretePotentialSpace& space, std::size_t i, std::size_t j) {
  if (i >= space.x_size() || j >= space.m_size()) throw std::out_of_range("kernel_eval: point index out of range");
  return std::visit(overloaded{[&](const RieszKernel& k) {
                                 return riesz_value(distance(coords(space.x_points, i, "evaluation"),
                                                             coords(space.m_points, j, "M")),
                                                    k);
                               },
                               [&](const BesselKernel& k) {
                                 return bessel_value(distance(coords(space.x_points, i, "evaluation"),
                                                              coords(space.m_points, j, "M")),
                                                     k);
                               },
                               [&](const ConstantKernel& k) { return k.value; },
                               [&](const DiagonalKernel&) { return i == j ? 1.0 / space.nu[j] : 0.0; },
                               [&](const ExplicitMatrixKernel& k) {
                                 if (i >= k.rows.size() || j >= k.rows[i].size())
                                   throw std::invalid_argument("explicit kernel: matrix smaller than the space");
                                 return k.rows[i][j];
                               }},
                    kernel);
}

KernelMatrix kernel_matrix(const Kernel& kernel, const DiscretePotentialSpace& space) {
  space.validate();
  if (const auto* m = std::get_if<ExplicitMatrixKernel>(&kernel)) {
    if (m->rows.size() != space.x_size()) throw std::invalid_argument("explicit kernel: one row per evaluation point expected");
    for (const auto& row : m->rows)
      if (row.size() != space.m_size()) throw std::invalid_argument("explicit kernel: one column per point of M expected");
  }
  if (std::holds_alternative<DiagonalKernel>(kernel) && space.x_size() != space.m_size())
    throw std::invalid_argument("diagonal kernel: evaluation points must match M");
  if (const auto* c = std::get_if<ConstantKernel>(&kernel); c && !(c->value >= 0.0))
    throw std::invalid_argument("constant kernel: value must be nonnegative");

  KernelMatrix out{Eigen::MatrixXd(space.x_size(), space.m_size()), 0};
  const double cap = std::visit(overloaded{[](const RieszKernel& k) { return k.k_max.value_or(INFINITY); },
                                           [](const BesselKernel& k) { return k.k_max.value_or(INFINITY); },
                                           [](const auto&) { return static_cast<double>(INFINITY); }},
                                kernel);
  for (std::size_t i = 0; i < space.x_size(); ++i)
    for (std::size_t j = 0; j < space.m_size(); ++j) {
      double v = kernel_eval(kernel, space, i, j);
      if (!(v >= 0.0)) throw std::invalid_argument("kernel values must be nonnegative");
      if (v >= cap) ++out.capped_entries;
      out.g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  return out;
}

}  // namespace capacitylab::potential
