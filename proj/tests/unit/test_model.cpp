#include <cmath>
#include <vector>

#include "doctest.h"
#include "sdsm/errors.hpp"
#include "sdsm/model.hpp"

using namespace sdsm;

namespace {

ModelCoefficients degenerate_model() {
  return make_model(1, ConstantC{Eigen::MatrixXd::Zero(1, 1)}, ZeroH{}, 1.0,
                    OffspringLaw::critical_binary());
}

}  // namespace

TEST_CASE("offspring law moments and criticality") {
  auto law = OffspringLaw::critical_binary();
  CHECK(law.mean() == doctest::Approx(1.0));
  CHECK(law.sigma2() == doctest::Approx(1.0));
  CHECK_NOTHROW(law.check_critical());

  OffspringLaw supercritical({0.6, 0.0, 0.2, 0.0, 0.2});
  CHECK(supercritical.mean() == doctest::Approx(1.2));
  CHECK_THROWS_AS(supercritical.check_critical(), ModelError);
  CHECK_THROWS_AS(OffspringLaw({0.5, 0.6}), ModelError);
  CHECK_THROWS_AS(OffspringLaw({0.25, 0.5, 0.25}).check_critical(), ModelError);  // p1 != 0

  // p0 = 2/3, p3 = 1/3: mean 1, sigma^2 = 9/3 - 1 = 2.
  OffspringLaw ternary({2.0 / 3.0, 0.0, 0.0, 1.0 / 3.0});
  CHECK_NOTHROW(ternary.check_critical());
  CHECK(ternary.sigma2() == doctest::Approx(2.0));

  RandomStream rng(5, 0);
  double s = 0;
  const int n = 60000;
  for (int i = 0; i < n; ++i) s += ternary.sample(rng);
  CHECK(std::abs(s / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("rho of the reference model") {
  auto model = reference_model();
  std::vector<double> z0{0.0}, z2{2.0};
  // Gaussian convolution oracle: rho(z) = exp(-z^2 / 8).
  CHECK(rho(model, z0)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rho(model, z2)(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(rho_quadrature(model, z2)(0, 0) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  CHECK(rho_quadrature(model, z0)(0, 0) == doctest::Approx(1.0).epsilon(1e-9));

  auto flat = degenerate_model();
  CHECK(rho(flat, z2)(0, 0) == 0.0);
  CHECK(rho(flat.without_closed_form_rho(), z2)(0, 0) == 0.0);
}

TEST_CASE("rho symmetry in two dimensions with distinct amplitudes") {
  auto model = make_model(2, ConstantC{Eigen::MatrixXd::Identity(2, 2)},
                          GaussianH{{1.0, 0.5}, 0.8}, 1.0, OffspringLaw::critical_binary());
  std::vector<double> z{0.7, -0.3}, mz{-0.7, 0.3};
  Eigen::MatrixXd a = rho(model, z), b = rho(model, mz);
  CHECK((a - b.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::MatrixXd q = rho_quadrature(model.without_closed_form_rho(), z);
  CHECK((a - q).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gamma assembly examples") {
  auto model = reference_model();
  std::vector<double> one{0.3};
  auto g1 = assemble_gamma(model, one);
  CHECK(g1.matrix.rows() == 1);
  CHECK(g1.matrix(0, 0) == doctest::Approx(2.0));

  std::vector<double> two{0.0, 2.0};
  auto g2 = assemble_gamma(model, two);
  CHECK(g2.matrix(0, 0) == doctest::Approx(2.0));
  CHECK(g2.matrix(0, 1) == doctest::Approx(std::exp(-0.5)));
  CHECK(g2.matrix(1, 0) == doctest::Approx(std::exp(-0.5)));

  auto bounds = check_ellipticity(model, two);
  CHECK(bounds.lambda_min == doctest::Approx(2.0 - std::exp(-0.5)));
  CHECK(bounds.lambda_max == doctest::Approx(2.0 + std::exp(-0.5)));
  auto single = check_ellipticity(model, one);
  CHECK(single.lambda_min == doctest::Approx(2.0));
  CHECK(single.lambda_max == doctest::Approx(2.0));

  auto no_medium = make_model(1, ConstantC{Eigen::MatrixXd::Identity(1, 1)}, ZeroH{}, 1.0,
                              OffspringLaw::critical_binary());
  std::vector<double> same{1.0, 1.0};
  CHECK(assemble_gamma(no_medium, same).matrix(0, 1) == 0.0);
}

TEST_CASE("gamma is permutation equivariant") {
  auto model = make_model(2, ConstantC{Eigen::MatrixXd::Identity(2, 2) * 0.5},
                          GaussianH{{1.0, 0.7}, 1.1}, 1.0, OffspringLaw::critical_binary());
  std::vector<double> pos{0.0, 0.1, 1.0, -0.5, -0.4, 0.9};
  std::vector<double> perm{-0.4, 0.9, 0.0, 0.1, 1.0, -0.5};  // order (2, 0, 1)
  auto g = assemble_gamma(model, pos).matrix;
  auto gp = assemble_gamma(model, perm).matrix;
  int map[3] = {2, 0, 1};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK((gp.block(2 * i, 2 * j, 2, 2) - g.block(2 * map[i], 2 * map[j], 2, 2))
                .cwiseAbs()
                .maxCoeff() == 0.0);
}

TEST_CASE("ellipticity violation for the degenerate model") {
  std::vector<double> pos{0.0, 1.0};
  try {
    check_ellipticity(degenerate_model(), pos);
    FAIL("expected a violation");
  } catch (const EllipticityViolation& e) {
    CHECK(e.positions() == pos);
    CHECK(e.lambda_min() <= 0.0);
  }
}

TEST_CASE("quadratic form decomposition matches gamma") {
  auto model = make_model(2, ConstantC{(Eigen::MatrixXd(2, 2) << 1.0, 0.2, 0.0, 0.7).finished()},
                          GaussianH{{0.9, 0.4}, 0.7}, 1.0, OffspringLaw::critical_binary());
  RandomStream rng(77, 1);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> pos(6), xi(6);
    for (auto& v : pos) v = 2.0 * rng.normal();
    for (auto& v : xi) v = rng.normal();
    auto g = assemble_gamma(model, pos).matrix;
    Eigen::Map<Eigen::VectorXd> x(xi.data(), 6);
    double direct = x.dot(g * x);
    double parts = quadratic_form_by_parts(model, pos, xi);
    CHECK(parts >= 0.0);
    CHECK(std::abs(direct - parts) <= 1e-6 * std::abs(direct));
  }
}

TEST_CASE("model validation") {
  auto report = validate_model(reference_model());
  CHECK(report.max_rho_closed_form_error < 1e-7);
  CHECK(report.min_gamma_eigenvalue > 0.0);
  CHECK(report.h_l1_norms.size() == 1);
  CHECK_THROWS_AS(validate_model(degenerate_model()), ModelError);
  CHECK_THROWS_AS(validate_model(reference_model().with_offspring(OffspringLaw({1.0}))),
                  ModelError);

  auto s0 = constant_effective_diffusion(reference_model());
  REQUIRE(s0.has_value());
  CHECK(*s0 == doctest::Approx(2.0));
}
