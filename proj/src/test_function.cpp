#include "sdsm/test_function.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace sdsm {

namespace {

void require_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("test function dimension must be 1..4");
}

RadialJet gaussian_profile(double r, double s, double amp) {
  double s2 = s * s;
  RadialJet j;
  j.f = amp * std::exp(-r * r / (2.0 * s2));
  j.f1_over_r = -j.f / s2;
  j.f1 = r * j.f1_over_r;
  j.f2 = (r * r / (s2 * s2) - 1.0 / s2) * j.f;
  return j;
}

RadialJet compact_profile(double r, double R, double amp) {
  RadialJet j;
  double R2 = R * R;
  double u = r * r / R2;
  if (u >= 1.0) return j;
  double v = 1.0 - u;
  j.f = amp * std::exp(1.0 - 1.0 / v);
  if (j.f == 0.0) return j;
  j.f1_over_r = -2.0 * j.f / (R2 * v * v);
  j.f1 = r * j.f1_over_r;
  double g1 = -2.0 * r / (R2 * v * v);
  double g2 = -2.0 / (R2 * v * v) - 8.0 * r * r / (R2 * R2 * v * v * v);
  j.f2 = j.f * (g1 * g1 + g2);
  return j;
}

RadialJet weighted_profile(double r, double a, double c0, double c2) {
  double s = 1.0 + r * r;
  double w = std::pow(s, -0.5 * a);
  double P = c0 + c2 * r * r;
  double g = w * (2.0 * c2 - a * P / s);  // f1 = r g
  double w1 = -a * r * w / s;
  double g1 = w1 * (2.0 * c2 - a * P / s) + w * (-a * 2.0 * c2 * r / s + a * P * 2.0 * r / (s * s));
  RadialJet j;
  j.f = P * w;
  j.f1_over_r = g;
  j.f1 = r * g;
  j.f2 = g + r * g1;
  return j;
}

}  // namespace

std::string family_name(TestFunction::Family family) {
  switch (family) {
    case TestFunction::Family::constant: return "constant";
    case TestFunction::Family::linear: return "linear";
    case TestFunction::Family::gaussian_bump: return "gaussian_bump";
    case TestFunction::Family::compact_bump: return "compact_bump";
    case TestFunction::Family::weighted_polynomial: return "weighted_polynomial";
    case TestFunction::Family::resolvent_kernel: return "resolvent_kernel";
    case TestFunction::Family::heat_mollifier: return "heat_mollifier";
  }
  return "unknown";
}

TestFunction::TestFunction(Family family, int dim, std::string name)
    : family_(family), dim_(dim), name_(std::move(name)), center_(dim, 0.0) {
  require_dim(dim);
}

TestFunction TestFunction::constant(int dim, double c) {
  TestFunction f(Family::constant, dim, "constant");
  f.constant_ = c;
  f.parameters_ = {c};
  return f;
}

TestFunction TestFunction::linear(std::vector<double> coefficients) {
  TestFunction f(Family::linear, static_cast<int>(coefficients.size()), "linear");
  f.coefficients_ = std::move(coefficients);
  f.parameters_ = f.coefficients_;
  return f;
}

TestFunction TestFunction::gaussian_bump(std::vector<double> center, double width,
                                         double amplitude) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian bump width must be positive");
  TestFunction f(Family::gaussian_bump, static_cast<int>(center.size()), "gaussian_bump");
  f.center_ = std::move(center);
  f.parameters_ = {width, amplitude};
  f.profile_ = [width, amplitude](double r) { return gaussian_profile(r, width, amplitude); };
  f.profile_value_ = [width, amplitude](double r) {
    return amplitude * std::exp(-r * r / (2.0 * width * width));
  };
  return f;
}

TestFunction TestFunction::compact_bump(std::vector<double> center, double radius,
                                        double amplitude) {
  if (!(radius > 0.0)) throw std::invalid_argument("bump radius must be positive");
  TestFunction f(Family::compact_bump, static_cast<int>(center.size()), "compact_bump");
  f.center_ = std::move(center);
  f.support_radius_ = radius;
  f.parameters_ = {radius, amplitude};
  f.profile_ = [radius, amplitude](double r) { return compact_profile(r, radius, amplitude); };
  f.profile_value_ = [radius, amplitude](double r) {
    double u = r * r / (radius * radius);
    return u >= 1.0 ? 0.0 : amplitude * std::exp(1.0 - 1.0 / (1.0 - u));
  };
  return f;
}

TestFunction TestFunction::weighted_polynomial(int dim, double a, double c0, double c2) {
  if (!(a >= 0.0)) throw std::invalid_argument("weight exponent must be non-negative");
  TestFunction f(Family::weighted_polynomial, dim, "weighted_polynomial");
  f.parameters_ = {a, c0, c2};
  f.profile_ = [a, c0, c2](double r) { return weighted_profile(r, a, c0, c2); };
  f.profile_value_ = [a, c0, c2](double r) {
    return (c0 + c2 * r * r) * std::pow(1.0 + r * r, -0.5 * a);
  };
  return f;
}

TestFunction TestFunction::resolvent_kernel(std::vector<double> center, const KernelSpec& spec) {
  if (static_cast<int>(center.size()) != spec.dim)
    throw std::invalid_argument("kernel center dimension mismatch");
  TestFunction f(Family::resolvent_kernel, spec.dim, "resolvent_kernel");
  f.center_ = std::move(center);
  f.parameters_ = {spec.lambda, spec.eps, spec.sigma0_sq};
  auto kernel = std::make_shared<ResolventKernel>(spec);
  f.profile_ = [kernel](double r) { return kernel->profile(r); };
  if (spec.dim == 1) {
    f.profile_value_ = [kernel](double r) { return kernel->profile(r).f; };
  } else {
    f.profile_value_ = [spec](double r) { return laplace_heat_integral(spec, r, HeatTerm::value); };
  }
  return f;
}

TestFunction TestFunction::heat_mollifier(std::vector<double> center, const KernelSpec& spec) {
  spec.validate();
  if (!(spec.eps > 0.0)) throw std::invalid_argument("mollifier needs eps > 0");
  if (static_cast<int>(center.size()) != spec.dim)
    throw std::invalid_argument("kernel center dimension mismatch");
  double width = std::sqrt(spec.sigma0_sq * spec.eps);
  double amplitude = std::pow(2.0 * std::acos(-1.0) * width * width, -0.5 * spec.dim);
  TestFunction f = gaussian_bump(std::move(center), width, amplitude);
  f.family_ = Family::heat_mollifier;
  f.name_ = "heat_mollifier";
  f.parameters_ = {spec.eps, spec.sigma0_sq};
  return f;
}

double TestFunction::value(std::span<const double> x) const {
  switch (family_) {
    case Family::constant: return constant_;
    case Family::linear: {
      double s = 0.0;
      for (int p = 0; p < dim_; ++p) s += coefficients_[p] * x[p];
      return s;
    }
    default: {
      double r2 = 0.0;
      for (int p = 0; p < dim_; ++p) r2 += (x[p] - center_[p]) * (x[p] - center_[p]);
      return profile_value_(std::sqrt(r2));
    }
  }
}

Jet TestFunction::jet(std::span<const double> x) const {
  Jet j;
  switch (family_) {
    case Family::constant:
      j.value = constant_;
      return j;
    case Family::linear:
      for (int p = 0; p < dim_; ++p) {
        j.value += coefficients_[p] * x[p];
        j.grad[p] = coefficients_[p];
      }
      return j;
    default:
      break;
  }
  std::array<double, kMaxDim> y{};
  double r2 = 0.0;
  for (int p = 0; p < dim_; ++p) {
    y[p] = x[p] - center_[p];
    r2 += y[p] * y[p];
  }
  double r = std::sqrt(r2);
  RadialJet rj = profile_(r);
  j.value = rj.f;
  // grad = f'(r) y / r; Hessian = (f'/r) I + (f'' - f'/r) y y^T / r^2.
  double radial_part = r > 0.0 ? (rj.f2 - rj.f1_over_r) / r2 : 0.0;
  for (int p = 0; p < dim_; ++p) {
    j.grad[p] = rj.f1_over_r * y[p];
    for (int q = p; q < dim_; ++q) {
      double h = radial_part * y[p] * y[q];
      if (p == q) h += rj.f1_over_r;
      j.hess[p * kMaxDim + q] = h;
      j.hess[q * kMaxDim + p] = h;
    }
  }
  return j;
}

}  // namespace sdsm
