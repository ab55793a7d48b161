#include "sdsm/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <stdexcept>

namespace sdsm::quad {

namespace {

using Gauss15 = boost::math::quadrature::gauss<double, 15>;

// Reference nodes/weights on [-1, 1], expanded from Boost's half-range table.
struct ReferenceRule {
  std::vector<double> x, w;
  ReferenceRule() {
    const auto& abscissa = Gauss15::abscissa();
    const auto& weight = Gauss15::weights();
    for (std::size_t i = abscissa.size(); i-- > 1;) {
      x.push_back(-abscissa[i]);
      w.push_back(weight[i]);
    }
    x.push_back(abscissa[0]);  // odd order: centre node
    w.push_back(weight[0]);
    for (std::size_t i = 1; i < abscissa.size(); ++i) {
      x.push_back(abscissa[i]);
      w.push_back(weight[i]);
    }
  }
};

const ReferenceRule& reference() {
  static const ReferenceRule rule;
  return rule;
}

}  // namespace

Rule gauss_legendre(double a, double b, int panels) {
  if (panels < 1) throw std::invalid_argument("gauss_legendre: panels < 1");
  const auto& ref = reference();
  Rule rule;
  rule.nodes.reserve(ref.x.size() * panels);
  rule.weights.reserve(ref.x.size() * panels);
  const double width = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    for (std::size_t k = 0; k < ref.x.size(); ++k) {
      rule.nodes.push_back(mid + 0.5 * width * ref.x[k]);
      rule.weights.push_back(0.5 * width * ref.w[k]);
    }
  }
  return rule;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 int panels) {
  const auto& ref = reference();
  const double width = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * width;
    double panel = 0.0;
    for (std::size_t k = 0; k < ref.x.size(); ++k)
      panel += ref.w[k] * f(mid + 0.5 * width * ref.x[k]);
    total += 0.5 * width * panel;
  }
  return total;
}

Refined integrate_refined(const std::function<double(double)>& f, double a,
                          double b, double rel_tol, double abs_floor,
                          int start_panels, int max_panels) {
  Refined out;
  int panels = start_panels;
  double previous = integrate(f, a, b, panels);
  while (panels < max_panels) {
    panels *= 2;
    const double current = integrate(f, a, b, panels);
    out.value = current;
    out.panels = panels;
    out.last_change = std::abs(current - previous);
    if (out.last_change <= rel_tol * std::max(std::abs(current), abs_floor)) {
      out.converged = true;
      return out;
    }
    previous = current;
  }
  out.value = previous;
  return out;
}

double integrate_box(const std::function<double(const double*)>& f,
                     const std::vector<double>& lo, const std::vector<double>& hi,
                     int panels_per_axis) {
  const std::size_t d = lo.size();
  std::vector<Rule> rules;
  rules.reserve(d);
  for (std::size_t k = 0; k < d; ++k)
    rules.push_back(gauss_legendre(lo[k], hi[k], panels_per_axis));
  const std::size_t n = rules.front().nodes.size();
  std::vector<std::size_t> index(d, 0);
  std::vector<double> point(d);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (std::size_t k = 0; k < d; ++k) {
      point[k] = rules[k].nodes[index[k]];
      weight *= rules[k].weights[index[k]];
    }
    total += weight * f(point.data());
    std::size_t axis = 0;
    while (axis < d && ++index[axis] == n) index[axis++] = 0;
    if (axis == d) break;
  }
  return total;
}

double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double total = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k)
    total += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
  return total;
}

}  // namespace sdsm::quad
