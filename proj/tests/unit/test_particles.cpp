#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "sdsm/errors.hpp"
#include "sdsm/parallel.hpp"
#include "sdsm/particles.hpp"
#include "sdsm/stats.hpp"

using namespace sdsm;

namespace {

SimulationConfig small_config(double horizon, double dt, int n) {
  SimulationConfig c;
  c.horizon = horizon;
  c.dt = dt;
  c.theta = 2.0;
  c.n = n;
  c.seed = 17;
  return c;
}

ModelCoefficients frozen_model(double gamma, OffspringLaw law) {
  return make_model(1, ConstantC{Eigen::MatrixXd::Zero(1, 1)}, ZeroH{}, gamma, std::move(law));
}

}  // namespace

TEST_CASE("init_cloud examples") {
  RandomStream rng(1, 0);
  auto cloud = init_cloud(InitialMeasure::point_mass({0.0}), 2.0, 10, rng);
  CHECK(cloud.size() == 1024);
  CHECK(cloud.mass == doctest::Approx(1.0 / 1024));
  CHECK(cloud.total_mass() == doctest::Approx(1.0));
  for (double x : cloud.positions) CHECK(x == 0.0);

  auto empty = init_cloud(InitialMeasure::point_mass({0.0}, 0.0), 2.0, 10, rng);
  CHECK(empty.size() == 0);

  auto box = InitialMeasure::uniform_box({0.0}, {1.0}, 2.0);
  std::vector<double> means;
  for (int r = 0; r < 400; ++r) {
    RandomStream s(2, r);
    auto c = init_cloud(box, 2.0, 3, s);
    REQUIRE(c.size() == 16);
    means.push_back(std::accumulate(c.positions.begin(), c.positions.end(), 0.0) / 16.0);
  }
  auto est = stats::mean(means);
  // Oracle: mean 1/2, sd of a 16-point average sqrt(1/12/16).
  CHECK(std::abs(est.value - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / 16.0 / 400.0));
}

TEST_CASE("config validation") {
  auto model = reference_model();
  auto c = small_config(1.0, 0.01, 4);  // gamma theta^n dt = 0.16
  CHECK_THROWS_AS(c.validate(model), ConfigError);
  c.branching = BranchingMode::exact_events;
  CHECK_NOTHROW(c.validate(model));
  auto bad = small_config(1.0, 0.3, 1);
  CHECK_THROWS_AS(bad.steps(), ConfigError);
  auto zero_dt = small_config(1.0, 0.0, 1);
  CHECK_THROWS_AS(zero_dt.validate(model), ConfigError);
}

TEST_CASE("degenerate model is rejected before simulation") {
  auto model = frozen_model(1.0, OffspringLaw::critical_binary());
  auto c = small_config(0.1, 0.01, 2);
  CHECK_THROWS_AS(simulate(c, model, InitialMeasure::point_mass({0.0}), {}), EllipticityViolation);
  c.allow_degenerate = true;
  CHECK_NOTHROW(simulate(c, model, InitialMeasure::point_mass({0.0}), {}));

  // c = 0 with a medium is still degenerate: coincident particles move together.
  auto medium_only = make_model(1, ConstantC{Eigen::MatrixXd::Zero(1, 1)}, GaussianH{{1.0}, 1.0},
                                1.0, OffspringLaw::critical_binary());
  std::vector<double> one{0.0};
  CHECK_THROWS_AS(ellipticity_gate(medium_only, one), EllipticityViolation);
}

TEST_CASE("zero horizon gives the initial snapshot") {
  auto c = small_config(0.0, 0.01, 3);
  c.snapshot_stride = 1;
  auto rec = simulate(c, reference_model(), InitialMeasure::point_mass({0.5}),
                      {TestFunction::constant(1)});
  CHECK(rec.times.size() == 1);
  REQUIRE(rec.snapshots.size() == 1);
  CHECK(rec.snapshots[0].positions == std::vector<double>(8, 0.5));
  CHECK(rec.observable("constant").value[0] == doctest::Approx(1.0));
}

TEST_CASE("no branching keeps the count and occupation is exact") {
  auto model = reference_model().with_gamma(0.0);
  auto c = small_config(0.5, 0.01, 0);
  auto rec = simulate(c, model, InitialMeasure::point_mass({0.0}), {TestFunction::constant(1)});
  for (auto a : rec.alive) CHECK(a == 1);
  CHECK(occupation_integral(rec, "constant") == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(occupation_left_sum(rec, "constant") == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("pure death empties the cloud") {
  auto model = frozen_model(1.0, OffspringLaw({1.0}));
  auto c = small_config(5.0, 0.01, 0);
  c.allow_degenerate = true;
  c.log_events = true;
  auto rec = simulate(c, model, InitialMeasure::point_mass({0.0}), {TestFunction::constant(1)});
  REQUIRE(rec.events.size() == 1);
  CHECK(rec.events[0].offspring == 0);
  bool emptied = false;
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    if (rec.alive[k] == 0) emptied = true;
    if (emptied) CHECK(rec.alive[k] == 0);
  }
  CHECK(emptied);
  CHECK(rec.observable("constant").M.back() == doctest::Approx(-1.0));
}

TEST_CASE("branching martingale equals the event-log sum") {
  auto model = reference_model();
  auto phi = TestFunction::gaussian_bump({0.0}, 1.0);
  for (auto mode : {BranchingMode::bernoulli, BranchingMode::exact_events}) {
    auto c = small_config(0.3, 0.005, 4);
    c.branching = mode;
    c.log_events = true;
    auto rec = simulate(c, model, InitialMeasure::point_mass({0.0}), {phi});
    REQUIRE(!rec.events.empty());
    double sum = 0.0;
    for (const auto& e : rec.events) sum += (e.offspring - 1) * rec.mass * phi.value(e.position);
    CHECK(rec.observable("gaussian_bump").M.back() == doctest::Approx(sum).epsilon(1e-12));
    // Branching changes <1, mu> by exactly the M increment of phi = 1.
  }
}

TEST_CASE("lineage labels follow the multi-index tree") {
  auto model = reference_model();
  auto c = small_config(0.2, 0.005, 3);
  c.lineage = true;
  auto rec = simulate(c, model, InitialMeasure::point_mass({0.0}), {});
  const auto& labels = rec.final_cloud.lineage;
  CHECK(labels.size() == rec.final_cloud.size());
  for (const auto& l : labels) {
    int root = std::stoi(l.substr(0, l.find("⊕")));
    CHECK(root >= 1);
    CHECK(root <= 8);
  }
}

TEST_CASE("determinism and worker independence") {
  auto model = reference_model();
  auto c = small_config(0.2, 0.005, 4);
  auto phi = TestFunction::gaussian_bump({0.0}, 1.0);
  auto a = simulate(c, model, InitialMeasure::point_mass({0.0}), {phi});
  auto b = simulate(c, model, InitialMeasure::point_mass({0.0}), {phi});
  CHECK(a.observable("gaussian_bump").value == b.observable("gaussian_bump").value);
  CHECK(a.observable("gaussian_bump").X == b.observable("gaussian_bump").X);

  auto run = [&](std::size_t r) {
    auto cr = c;
    cr.replicate = r;
    return simulate(cr, model, InitialMeasure::point_mass({0.0}), {phi})
        .observable("gaussian_bump")
        .value.back();
  };
  auto one = parallel_map(6, 1, run);
  auto three = parallel_map(6, 3, run);
  CHECK(one == three);
}

TEST_CASE("criticality in both branching modes") {
  auto model = reference_model();
  for (auto mode : {BranchingMode::bernoulli, BranchingMode::exact_events}) {
    auto c = small_config(1.0, 0.01, 3);  // 8 particles, gamma theta^n dt = 0.08
    c.branching = mode;
    c.track_martingales = false;
    auto masses = parallel_map(2000, 0, [&](std::size_t r) {
      auto cr = c;
      cr.replicate = r;
      auto rec = simulate(cr, model, InitialMeasure::point_mass({0.0}), {TestFunction::constant(1)});
      return rec.observable("constant").value;
    });
    for (int k : {25, 50, 100}) {
      std::vector<double> m;
      for (auto& v : masses) m.push_back(v[k]);
      auto est = stats::mean(m);
      CHECK(std::abs(stats::z_score(est.value, est.se, 1.0)) <= 3.0);
      if (mode == BranchingMode::exact_events) {
        // Var <1, mu_t> = gamma sigma^2 t <1, mu_0> for the exact clocks.
        auto var = stats::variance(m);
        CHECK(std::abs(stats::z_score(var.value, var.se, 0.01 * k)) <= 5.0);
      }
    }
  }
}

TEST_CASE("single-particle Ito residual shrinks with dt") {
  // gamma = 0 and one particle: the residual net of the discrete
  // second-order term is the Taylor remainder, O(dt) pathwise.
  auto model = reference_model().with_gamma(0.0);
  auto phi = TestFunction::gaussian_bump({0.3}, 0.7);
  std::vector<double> level;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    auto c = small_config(0.5, dt, 0);
    auto r = parallel_map(400, 0, [&](std::size_t i) {
      auto cr = c;
      cr.replicate = i;
      auto rec = simulate(cr, model, InitialMeasure::point_mass({0.0}), {phi});
      const auto& s = rec.observable("gaussian_bump");
      return std::abs(s.spde_residual() - s.Qd.back());
    });
    level.push_back(stats::mean(r).value);
  }
  CHECK(level[0] > level[1]);
  CHECK(level[1] > level[2]);
  std::vector<double> lx{std::log(4e-3), std::log(2e-3), std::log(1e-3)};
  std::vector<double> ly{std::log(level[0]), std::log(level[1]), std::log(level[2])};
  CHECK(stats::slope(lx, ly) >= 0.5);
}

TEST_CASE("public step on a bare cloud") {
  auto model = reference_model().with_gamma(0.0);
  RandomStream init(3, 0);
  auto cloud = init_cloud(InitialMeasure::point_mass({0.0}), 2.0, 2, init);
  auto c = small_config(0.01, 0.01, 2);
  RandomStream a(3, 1), b(3, 2);
  auto inc = step(cloud, model, c, a, b, {TestFunction::linear({1.0})});
  CHECK(cloud.size() == 4);
  CHECK(cloud.time == doctest::Approx(0.01));
  double mean_pos = std::accumulate(cloud.positions.begin(), cloud.positions.end(), 0.0) / 4;
  // For phi(x) = x: <phi, mu> change = X + U exactly (no second derivative).
  CHECK(inc[0].X + inc[0].U == doctest::Approx(mean_pos).epsilon(1e-12));
  CHECK(inc[0].Qd == 0.0);
}
