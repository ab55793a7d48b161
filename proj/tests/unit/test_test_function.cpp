#include <cmath>
#include <vector>

#include "doctest.h"
#include "sdsm/rng.hpp"
#include "sdsm/test_function.hpp"

using namespace sdsm;

namespace {

// Central differences of value (for the gradient) and of the analytic
// gradient (for the Hessian), compared at relative tolerance 1e-5.
void check_derivatives(const TestFunction& f, std::vector<double> x) {
  const int d = f.dim();
  Jet j = f.jet(x);
  CHECK(j.value == doctest::Approx(f.value(x)).epsilon(1e-13));
  double scale = 0.0;
  for (int p = 0; p < d; ++p) scale = std::max(scale, std::abs(j.grad[p]));
  for (int p = 0; p < d; ++p) {
    double h = 1e-5;
    auto xp = x, xm = x;
    xp[p] += h;
    xm[p] -= h;
    double fd = (f.value(xp) - f.value(xm)) / (2 * h);
    CHECK(std::abs(j.grad[p] - fd) <= 1e-5 * std::max(scale, 1e-3));
    Jet jp = f.jet(xp), jm = f.jet(xm);
    double hscale = 0.0;
    for (int q = 0; q < d; ++q) hscale = std::max(hscale, std::abs(j.hessian(p, q)));
    for (int q = 0; q < d; ++q) {
      double fdh = (jp.grad[q] - jm.grad[q]) / (2 * h);
      CHECK(std::abs(j.hessian(p, q) - fdh) <= 1e-5 * std::max(hscale, 1e-2));
      CHECK(j.hessian(p, q) == j.hessian(q, p));
    }
  }
}

}  // namespace

TEST_CASE("constant and linear families") {
  auto c = TestFunction::constant(2, 3.0);
  std::vector<double> x{0.4, -1.0};
  Jet j = c.jet(x);
  CHECK(j.value == 3.0);
  CHECK(j.grad[0] == 0.0);
  CHECK(j.hessian(1, 1) == 0.0);

  auto lin = TestFunction::linear({2.0, -1.0});
  j = lin.jet(x);
  CHECK(j.value == doctest::Approx(1.8));
  CHECK(j.grad[0] == 2.0);
  CHECK(j.grad[1] == -1.0);
}

TEST_CASE("radial families match finite differences") {
  RandomStream rng(11, 0);
  KernelSpec spec;
  spec.lambda = 1.0;
  spec.eps = 0.05;
  spec.sigma0_sq = 2.0;
  for (int d = 1; d <= 3; ++d) {
    std::vector<double> center(d, 0.3);
    spec.dim = d;
    std::vector<TestFunction> family{
        TestFunction::gaussian_bump(center, 0.8, 1.5),
        TestFunction::compact_bump(center, 2.0),
        TestFunction::weighted_polynomial(d, 1.5, 1.0, 0.5),
        TestFunction::heat_mollifier(center, spec),
    };
    if (d == 1) family.push_back(TestFunction::resolvent_kernel(center, spec));
    for (const auto& f : family) {
      for (int trial = 0; trial < 4; ++trial) {
        std::vector<double> x(d);
        for (auto& v : x) v = 0.3 + 0.7 * rng.normal();
        CAPTURE(f.name());
        check_derivatives(f, x);
      }
    }
  }
}

TEST_CASE("compact bump support and peak") {
  auto b = TestFunction::compact_bump({1.0}, 2.0, 3.0);
  std::vector<double> c{1.0}, out{3.0}, edge{2.999999};
  CHECK(b.value(c) == doctest::Approx(3.0));
  CHECK(b.value(out) == 0.0);
  CHECK(b.value(edge) >= 0.0);
  CHECK(b.support_radius() == 2.0);
  Jet j = b.jet(out);
  CHECK(j.grad[0] == 0.0);
}

TEST_CASE("heat mollifier is the normalized heat kernel") {
  KernelSpec spec;
  spec.dim = 1;
  spec.eps = 0.1;
  spec.sigma0_sq = 2.0;
  auto q = TestFunction::heat_mollifier({0.5}, spec);
  std::vector<double> x{1.2}, y{0.5 - 1.2};
  // q_eps(x - z) at z = 1.2 equals the heat kernel at 0.5 - 1.2.
  CHECK(q.value(x) == doctest::Approx(heat_kernel(spec, 0.1, y)).epsilon(1e-14));
}

TEST_CASE("translated resolvent kernel") {
  KernelSpec spec;
  spec.dim = 1;
  spec.eps = 0.05;
  spec.sigma0_sq = 2.0;
  auto psi = TestFunction::resolvent_kernel({1.0}, spec);
  std::vector<double> z{0.25}, diff{0.75};
  CHECK(psi.value(z) == doctest::Approx(q_lambda_eps(spec, diff)).epsilon(1e-14));
  // grad_z psi(z) = -(grad Q)(x - z)
  CHECK(psi.jet(z).grad[0] == doctest::Approx(-grad_q_lambda_eps(spec, diff)[0]).epsilon(1e-12));
}
