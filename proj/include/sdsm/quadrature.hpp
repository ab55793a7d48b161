#ifndef SDSM_QUADRATURE_HPP
#define SDSM_QUADRATURE_HPP

#include <functional>
#include <vector>

namespace sdsm::quad {

/// Nodes and weights of a composite rule on [a, b].
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Composite 15-point Gauss-Legendre rule with `panels` equal panels.
Rule gauss_legendre(double a, double b, int panels);

double integrate(const std::function<double(double)>& f, double a, double b,
                 int panels);

struct Refined {
  double value = 0.0;
  double last_change = 0.0;
  int panels = 0;
  bool converged = false;
};

/// Doubles the panel count until two successive values differ by at most
/// rel_tol * max(|value|, abs_floor). Does not throw; check `converged`.
Refined integrate_refined(const std::function<double(double)>& f, double a,
                          double b, double rel_tol, double abs_floor = 0.0,
                          int start_panels = 4, int max_panels = 4096);

/// Tensor-product composite Gauss-Legendre over the box [lo, hi] (per axis),
/// summing f at each node times the product weight. f gets a pointer to the
/// d coordinates.
double integrate_box(const std::function<double(const double*)>& f,
                     const std::vector<double>& lo, const std::vector<double>& hi,
                     int panels_per_axis);

/// Trapezoidal rule over a (possibly irregular) grid.
double trapezoid(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace sdsm::quad

#endif  // SDSM_QUADRATURE_HPP
