#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "doctest.h"
#include "sdsm/errors.hpp"
#include "sdsm/localtime.hpp"

using namespace sdsm;

namespace {

ModelCoefficients frozen_model() {
  return make_model(1, ConstantC{Eigen::MatrixXd::Zero(1, 1)}, ZeroH{}, 0.0,
                    OffspringLaw::critical_binary());
}

SimulationConfig frozen_config(double horizon, double dt) {
  SimulationConfig c;
  c.horizon = horizon;
  c.dt = dt;
  c.n = 0;
  c.snapshot_stride = 1;
  c.allow_degenerate = true;
  return c;
}

KernelSpec spec_for(double eps, double lambda) {
  KernelSpec s;
  s.dim = 1;
  s.eps = eps;
  s.lambda = lambda;
  s.sigma0_sq = 2.0;
  return s;
}

double gauss(double x, double var) {
  return std::exp(-x * x / (2 * var)) / std::sqrt(2 * M_PI * var);
}

}  // namespace

TEST_CASE("frozen particle: Lambda = t q_eps(x - x0), both forms") {
  const double x0 = 0.3, T = 0.5;
  auto rec = simulate(frozen_config(T, 0.01), frozen_model(), InitialMeasure::point_mass({x0}), {});
  auto ref = reference_model();
  std::vector<double> x{0.0};
  for (double lambda : {0.5, 1.0, 2.0}) {
    auto est = local_time(rec, ref, x, 0.1, lambda);
    // Oracle: q_eps is the heat kernel with variance sigma0^2 eps = 0.2.
    CHECK(est.value == doctest::Approx(T * gauss(x0, 0.2)).epsilon(1e-12));
    CHECK(std::abs(est.form_difference) < 1e-6);
  }
  std::vector<double> far{20.0};
  auto est = local_time(rec, ref, far, 0.1, 1.0);
  CHECK(std::abs(est.value) < 1e-12);
  CHECK(std::abs(est.resolvent_form) < 1e-12);
}

TEST_CASE("empty path has zero local time") {
  auto rec = simulate(frozen_config(0.2, 0.01), frozen_model(),
                      InitialMeasure::point_mass({0.0}, 0.0), {});
  auto est = local_time(rec, reference_model(), std::vector<double>{0.0}, 0.1, 1.0);
  CHECK(est.value == 0.0);
  CHECK(est.resolvent_form == 0.0);
}

TEST_CASE("registered mollifier agrees with snapshots") {
  auto ref = reference_model();
  SimulationConfig c;
  c.horizon = 0.2;
  c.dt = 0.002;
  c.n = 4;
  c.seed = 5;
  c.snapshot_stride = 1;
  auto q = mollifier_observable({0.1}, spec_for(0.05, 1.0));
  auto rec = simulate(c, ref, InitialMeasure::point_mass({0.0}), {q});
  auto from_obs = local_time_series(rec, ref, std::vector<double>{0.1}, 0.05);
  rec.series.clear();
  rec.observables.clear();
  auto from_snap = local_time_series(rec, ref, std::vector<double>{0.1}, 0.05);
  REQUIRE(from_obs.size() == from_snap.size());
  for (std::size_t k = 0; k < from_obs.size(); ++k)
    CHECK(from_obs[k] == doctest::Approx(from_snap[k]).epsilon(1e-12));
}

TEST_CASE("Tanaka decomposition closes and needs M") {
  auto ref = reference_model();
  const double eps = 0.1, lambda = 1.0;
  std::vector<double> x{0.2};
  SimulationConfig c;
  c.horizon = 0.25;
  c.dt = 5e-4;
  c.n = 6;
  c.seed = 11;
  auto psi = tanaka_observable(x, spec_for(eps, lambda));
  auto q = mollifier_observable(x, spec_for(eps, lambda));
  double full = 0.0, ablated = 0.0;
  for (int r = 0; r < 4; ++r) {
    c.replicate = r;
    auto rec = simulate(c, ref, InitialMeasure::point_mass({0.0}), {psi, q});
    full += tanaka_residual(rec, ref, x, eps, lambda);
    ablated += tanaka_residual(rec, ref, x, eps, lambda, {false, true, true});
  }
  MESSAGE("tanaka residual " << full / 4 << " without M " << ablated / 4);
  CHECK(full / 4 < 2e-3);
  CHECK(ablated > 10 * full);
}

TEST_CASE("occupation consistency: frozen gap oracle") {
  const double x0 = 0.4, T = 0.5;
  auto rec = simulate(frozen_config(T, 0.05), frozen_model(), InitialMeasure::point_mass({x0}), {});
  auto phi = TestFunction::compact_bump({0.0}, 2.0);
  std::vector<double> eps{0.1, 0.05, 0.025};
  auto rep = occupation_consistency(rec, reference_model(), phi, eps, 64);
  CHECK(rep.kernel_mass_ok);
  CHECK(rep.occupation == doctest::Approx(T * phi.value(std::vector<double>{x0})).epsilon(1e-14));
  for (std::size_t i = 0; i < eps.size(); ++i) {
    // Oracle: (q_eps * phi)(x0) - phi(x0) by adaptive Gauss-Kronrod.
    double var = 2.0 * eps[i];
    double conv = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        [&](double y) { return gauss(x0 - y, var) * phi.value(std::vector<double>{y}); }, -2.0, 2.0,
        15, 1e-13);
    double expect = T * (conv - phi.value(std::vector<double>{x0}));
    CHECK(rep.gap[i] == doctest::Approx(expect).epsilon(1e-8));
  }
  CHECK(rep.monotone);
  for (double o : rep.orders) CHECK(o == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("local time input checks") {
  auto rec = simulate(frozen_config(0.1, 0.01), frozen_model(), InitialMeasure::point_mass({0.0}), {});
  auto ref = reference_model();
  CHECK_THROWS_AS(tanaka_rhs(rec, ref, std::vector<double>{0.0}, 0.1, 1.0), ConfigError);
  rec.snapshots.resize(2);
  CHECK_THROWS_AS(local_time(rec, ref, std::vector<double>{0.0}, 0.1, 1.0), ConfigError);
  auto d4 = make_model(4, ConstantC{Eigen::MatrixXd::Identity(4, 4)}, ZeroH{}, 1.0,
                       OffspringLaw::critical_binary());
  CHECK_THROWS_AS(local_time(rec, d4, std::vector<double>{0, 0, 0, 0}, 0.1, 1.0), DomainError);
  auto rough = TestFunction::compact_bump({0.0}, 2.0);
  auto full = simulate(frozen_config(0.1, 0.01), frozen_model(), InitialMeasure::point_mass({0.0}), {});
  CHECK_THROWS_AS(occupation_consistency(full, ref, rough, {1e-6}, 4), ConfigError);
}
