#include "sdsm/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "sdsm/dual.hpp"
#include "sdsm/errors.hpp"
#include "sdsm/green.hpp"
#include "sdsm/localtime.hpp"
#include "sdsm/parallel.hpp"
#include "sdsm/quadrature.hpp"
#include "sdsm/stats.hpp"

namespace sdsm {

using io::Json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, const std::string& label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : label) h = (h ^ ch) * 0x100000001b3ULL;
  return splitmix64(base ^ h);
}

template <class T>
T param(const Json& check, const char* key, T fallback) {
  if (!check.contains(key)) return fallback;
  try {
    return check.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("bad value for check parameter \"") + key + "\"");
  }
}

double finite_or(double x, double fallback) { return std::isfinite(x) ? x : fallback; }

/// Collects the parts of one check and sets pass, score and detail.
class Parts {
 public:
  explicit Parts(CheckReport& r) : r_(r) {}

  void z(const std::string& name, double value, double se, double expected, double expected_se = 0.0,
         double gate = 3.0) {
    double zz = stats::z_score(value, se, expected, expected_se);
    Json p{{"name", name},   {"value", value}, {"se", se},   {"expected", expected},
           {"expected_se", expected_se}, {"z", zz}, {"gate", gate}, {"pass", std::abs(zz) <= gate}};
    add(p, std::abs(zz) / gate, std::abs(zz) <= gate, true);
    if (first_) set_primary(value, expected, std::hypot(se, expected_se), std::abs(zz));
  }

  void tolerance(const std::string& name, double value, double bound, Json extra = Json::object()) {
    double ratio = finite_or(value / bound, 1e300);
    Json p{{"name", name}, {"value", value}, {"bound", bound}, {"ratio", ratio}, {"pass", ratio <= 1.0}};
    p.update(extra);
    add(p, ratio, ratio <= 1.0, false);
    if (first_) set_primary(value, 0.0, 0.0, ratio);
  }

  /// Slope of the log mean error against log dt; pass iff >= 0.5.
  void slope(const std::string& name, const std::vector<double>& dt, const std::vector<double>& err,
             bool expect_pass = true) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < dt.size(); ++i) {
      lx.push_back(std::log(dt[i]));
      ly.push_back(std::log(err[i]));
    }
    double s = stats::slope(lx, ly);
    bool meets = s >= 0.5;
    bool ok = expect_pass ? meets : !meets;
    double ratio = expect_pass ? (s > 0 ? 0.5 / s : 1e300) : (meets ? 1e300 : 0.0);
    Json p{{"name", name}, {"slope", s}, {"min_slope", 0.5}, {"dt", dt}, {"mean_abs_error", err},
           {"negative_control", !expect_pass}, {"pass", ok}};
    add(p, finite_or(ratio, 1e300), ok, false);
    if (first_) set_primary(s, 0.5, 0.0, ratio);
  }

  void flag(const std::string& name, bool ok, Json info = Json::object()) {
    info["name"] = name;
    info["pass"] = ok;
    add(info, ok ? 0.0 : 1e300, ok, false);
    if (first_) set_primary(ok ? 1.0 : 0.0, 1.0, 0.0, ok ? 0.0 : 1.0);
  }

  void finish() {
    r_.detail["parts"] = parts_;
    if (!r_.error.empty()) {
      r_.kind = "error";
      r_.pass = false;
      return;
    }
    const bool single_z = parts_.size() == 1 && all_z_;
    r_.kind = single_z ? "statistical" : (only_flags() ? "flag" : "tolerance");
    if (r_.kind == "tolerance") r_.score = worst_;
    if (r_.kind == "flag") r_.score = all_ok_ ? 0.0 : 1.0;
    r_.pass = all_ok_ && !parts_.empty();
  }

 private:
  void add(Json p, double normalized, bool ok, bool is_z) {
    parts_.push_back(std::move(p));
    worst_ = std::max(worst_, normalized);
    all_ok_ = all_ok_ && ok;
    all_z_ = all_z_ && is_z;
    flags_only_ = flags_only_ && !parts_.back().contains("value") && !parts_.back().contains("slope");
  }
  void set_primary(double stat, double expected, double se, double score) {
    r_.statistic = stat;
    r_.expected = expected;
    r_.se = se;
    r_.score = score;
    first_ = false;
  }
  bool only_flags() const { return flags_only_; }

  CheckReport& r_;
  Json parts_ = Json::array();
  double worst_ = 0.0;
  bool all_ok_ = true;
  bool all_z_ = true;
  bool flags_only_ = true;
  bool first_ = true;
};

struct Context {
  const Json& manifest;
  ModelCoefficients model;
  std::uint64_t seed;
  int workers;
};

InitialMeasure initial_of(const Context& ctx, const Json& check) {
  if (check.contains("initial")) return io::initial_from_json(check["initial"]);
  if (ctx.manifest.contains("initial")) return io::initial_from_json(ctx.manifest["initial"]);
  return InitialMeasure::point_mass(std::vector<double>(ctx.model.dim(), 0.0));
}

double sigma0_sq_of(const ModelCoefficients& model) {
  auto s0 = constant_effective_diffusion(model);
  if (!s0) throw ConfigError("check needs a constant scalar effective diffusion");
  return *s0;
}

template <class Fn>
auto ensemble(const Context& ctx, const SimulationConfig& base, const InitialMeasure& mu0,
              const std::vector<TestFunction>& obs, std::size_t reps, Fn&& fn) {
  base.validate(ctx.model);
  return parallel_map(reps, ctx.workers, [&](std::size_t r) {
    SimulationConfig c = base;
    c.replicate = r;
    return fn(simulate(c, ctx.model, mu0, obs));
  });
}

// ------------------------------------------------------------ moment ensemble

struct MomentEnsemble {
  std::vector<double> times;
  std::vector<std::vector<double>> phi;   ///< [time][rep]
  std::vector<std::vector<double>> mass;  ///< [time][rep]
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  double horizon = 0.0;
  double dt = 0.0;
  double width = 1.0;
};

std::string moment_key(const Json& check) {
  Json k{{"n", param(check, "n", 10)},
         {"theta", param(check, "theta", 2.0)},
         {"dt", param(check, "dt", 0.01)},
         {"horizon", param(check, "horizon", 0.5)},
         {"reps", param(check, "reps", 2000)},
         {"width", param(check, "width", 1.0)},
         {"seed", param<std::uint64_t>(check, "seed", 0)}};
  return k.dump();
}

MomentEnsemble run_moment_ensemble(const Context& ctx, const Json& check) {
  MomentEnsemble e;
  SimulationConfig c;
  c.n = param(check, "n", 10);
  c.theta = param(check, "theta", 2.0);
  c.dt = param(check, "dt", 0.01);
  c.horizon = param(check, "horizon", 0.5);
  c.branching = BranchingMode::exact_events;
  c.track_martingales = false;
  c.seed = check.contains("seed") ? check["seed"].get<std::uint64_t>()
                                  : derive_seed(ctx.seed, "moment_ensemble");
  e.seed = c.seed;
  e.reps = param<std::size_t>(check, "reps", 2000);
  e.horizon = c.horizon;
  e.dt = c.dt;
  e.width = param(check, "width", 1.0);
  const int d = ctx.model.dim();
  std::vector<TestFunction> obs{TestFunction::gaussian_bump(std::vector<double>(d, 0.0), e.width),
                                TestFunction::constant(d)};
  const int points = 5;
  std::vector<std::size_t> idx;
  for (int j = 1; j <= points; ++j) {
    e.times.push_back(c.horizon * j / points);
    idx.push_back(static_cast<std::size_t>(std::llround(e.times.back() / c.dt)));
  }
  auto mu0 = initial_of(ctx, check);
  auto per_rep = ensemble(ctx, c, mu0, obs, e.reps, [&](const PathRecord& rec) {
    std::vector<double> v;
    for (auto k : idx) {
      v.push_back(rec.series[0].value[k]);
      v.push_back(rec.series[1].value[k]);
    }
    return v;
  });
  e.phi.assign(points, std::vector<double>(e.reps));
  e.mass.assign(points, std::vector<double>(e.reps));
  for (std::size_t r = 0; r < e.reps; ++r)
    for (int j = 0; j < points; ++j) {
      e.phi[j][r] = per_rep[r][2 * j];
      e.mass[j][r] = per_rep[r][2 * j + 1];
    }
  return e;
}

/// E <phi, mu_t> = sum_k w_k (p_t * phi)(x_k) for point masses under the
/// constant effective diffusion.
double first_moment_oracle(const ModelCoefficients& model, const InitialMeasure& mu0, double t,
                           double width) {
  if (model.dim() != 1 || mu0.kind() != InitialMeasure::Kind::point_masses)
    throw ConfigError("first-moment oracle needs d = 1 and point masses");
  KernelSpec spec;
  spec.dim = 1;
  spec.sigma0_sq = sigma0_sq_of(model);
  const double L = 12.0 * std::sqrt(spec.sigma0_sq * t) + 12.0 * width;
  double total = 0.0;
  for (std::size_t k = 0; k < mu0.weights().size(); ++k) {
    const double x0 = mu0.points()[k];
    total += mu0.weights()[k] *
             quad::integrate(
                 [&](double x) {
                   return heat_kernel(spec, t, std::vector<double>{x - x0}) *
                          std::exp(-x * x / (2 * width * width));
                 },
                 x0 - L, x0 + L, 256);
  }
  return total;
}

void check_first_moment(const Context& ctx, const Json& check, const MomentEnsemble& e,
                        CheckReport& r, Parts& parts) {
  auto mu0 = initial_of(ctx, check);
  const double oracle = first_moment_oracle(ctx.model, mu0, e.horizon, e.width);
  auto pm = stats::mean(e.phi.back());
  parts.z("particle_vs_oracle", pm.value, pm.se, oracle);

  DualMomentConfig dc;
  dc.m = 1;
  dc.t = e.horizon;
  dc.dt = e.dt;
  dc.reps = param<std::size_t>(check, "dual_reps", 20000);
  dc.seed = derive_seed(ctx.seed, "first_moment_dual");
  dc.workers = ctx.workers;
  auto phi = TestFunction::gaussian_bump(std::vector<double>(ctx.model.dim(), 0.0), e.width);
  auto dual = dual_moment(tensor_power(phi, 1), mu0, ctx.model, dc);
  parts.z("dual_vs_oracle", dual.estimate, dual.se, oracle);
  r.reps = static_cast<std::int64_t>(e.reps);
  r.seeds = {e.seed, dc.seed};
  r.detail["oracle"] = oracle;
  r.detail["dual_reps"] = dc.reps;
}

void check_second_moment(const Context& ctx, const Json& check, const MomentEnsemble& e,
                         CheckReport& r, Parts& parts) {
  auto mu0 = initial_of(ctx, check);
  const double m0 = mu0.total_mass();
  const double gs2 = ctx.model.gamma() * ctx.model.offspring().sigma2();
  std::vector<double> sq;
  for (double v : e.mass.back()) sq.push_back(v * v);
  auto pm = stats::mean(sq);
  const double expected = m0 * m0 + gs2 * e.horizon * m0;
  parts.z("particle_vs_qv_formula", pm.value, pm.se, expected);

  DualMomentConfig dc;
  dc.m = 2;
  dc.t = e.horizon;
  dc.dt = e.dt;
  dc.reps = param<std::size_t>(check, "dual_reps", 20000);
  dc.seed = derive_seed(ctx.seed, "second_moment_dual");
  dc.workers = ctx.workers;
  auto dual = dual_moment(tensor_power(TestFunction::constant(ctx.model.dim()), 2), mu0, ctx.model, dc);
  parts.z("particle_vs_dual", pm.value, pm.se, dual.estimate, dual.se);
  r.reps = static_cast<std::int64_t>(e.reps);
  r.seeds = {e.seed, dc.seed};
  r.detail["dual_estimate"] = dual.estimate;
  r.detail["dual_se"] = dual.se;
}

void check_criticality_variance(const Context& ctx, const Json& check, const MomentEnsemble& e,
                                CheckReport& r, Parts& parts) {
  auto mu0 = initial_of(ctx, check);
  const double m0 = mu0.total_mass();
  const double gs2 = ctx.model.gamma() * ctx.model.offspring().sigma2();
  for (std::size_t j = 0; j < e.times.size(); ++j) {
    char label[64];
    std::snprintf(label, sizeof label, "mean_mass_t=%g", e.times[j]);
    auto m = stats::mean(e.mass[j]);
    parts.z(label, m.value, m.se, m0);
  }
  for (std::size_t j = 0; j < e.times.size(); ++j) {
    char label[64];
    std::snprintf(label, sizeof label, "var_mass_t=%g", e.times[j]);
    auto v = stats::variance(e.mass[j]);
    parts.z(label, v.value, v.se, gs2 * e.times[j] * m0, 0.0, 5.0);
  }
  r.reps = static_cast<std::int64_t>(e.reps);
  r.seeds = {e.seed};
}

// ------------------------------------------------------------ SPDE and Tanaka

std::vector<double> dt_levels(const Json& check) {
  return param(check, "dt_levels", std::vector<double>{1e-3, 5e-4, 2.5e-4});
}

SimulationConfig level_config(const Json& check, double dt, std::uint64_t seed) {
  SimulationConfig c;
  c.n = param(check, "n", 6);
  c.theta = param(check, "theta", 2.0);
  c.horizon = param(check, "horizon", 0.25);
  c.dt = dt;
  c.seed = seed;
  c.branching = BranchingMode::bernoulli;
  return c;
}

void check_spde(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  const int d = ctx.model.dim();
  std::vector<double> origin(d, 0.0);
  std::vector<TestFunction> obs{TestFunction::gaussian_bump(origin, 1.0),
                                TestFunction::compact_bump(origin, 2.0),
                                TestFunction::weighted_polynomial(d, 4.0, 1.0, 0.5)};
  const auto levels = dt_levels(check);
  const auto reps = param<std::size_t>(check, "reps", 400);
  auto mu0 = initial_of(ctx, check);
  const std::size_t nf = obs.size();

  // per level: [rep] -> {R, R - Qd, X, M} per observable
  std::vector<std::vector<std::vector<double>>> data;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto seed = derive_seed(ctx.seed, "spde_level_" + std::to_string(l));
    r.seeds.push_back(seed);
    data.push_back(ensemble(ctx, level_config(check, levels[l], seed), mu0, obs, reps,
                            [&](const PathRecord& rec) {
                              std::vector<double> v;
                              for (const auto& s : rec.series) {
                                double R = s.spde_residual();
                                v.insert(v.end(), {R, R - s.Qd.back(), s.X.back(), s.M.back()});
                              }
                              return v;
                            }));
  }
  auto column = [&](std::size_t l, std::size_t f, int k) {
    std::vector<double> out;
    for (const auto& row : data[l]) out.push_back(row[4 * f + k]);
    return out;
  };
  const std::size_t fine = levels.size() - 1;
  Json raw = Json::object();
  for (std::size_t f = 0; f < nf; ++f) {
    auto R = column(fine, f, 0);
    auto m = stats::mean(R);
    parts.z(obs[f].name() + ":mean_residual", m.value, m.se, 0.0);
  }
  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<double> err, err_raw;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      auto net = column(l, f, 1), R = column(l, f, 0);
      for (auto& x : net) x = std::abs(x);
      for (auto& x : R) x = std::abs(x);
      err.push_back(stats::mean(net).value);
      err_raw.push_back(stats::mean(R).value);
    }
    parts.slope(obs[f].name() + ":residual_decay", levels, err);
    std::vector<double> lx, ly;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      lx.push_back(std::log(levels[l]));
      ly.push_back(std::log(err_raw[l]));
    }
    raw[obs[f].name()] = {{"mean_abs_raw_residual", err_raw}, {"slope", stats::slope(lx, ly)}};
  }
  for (std::size_t f = 0; f < nf; ++f) {
    auto cov = stats::covariance(column(fine, f, 2), column(fine, f, 3));
    parts.z(obs[f].name() + ":cov_X_M", cov.value, cov.se, 0.0);
  }
  r.reps = static_cast<std::int64_t>(reps * levels.size());
  r.detail["raw_residual"] = raw;
}

void check_tanaka(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  const double eps = param(check, "eps", 0.05);
  const double lambda = param(check, "lambda", 1.0);
  auto xs = param(check, "x", std::vector<std::vector<double>>{{0.0}, {1.0}});
  KernelSpec spec;
  spec.dim = ctx.model.dim();
  spec.sigma0_sq = sigma0_sq_of(ctx.model);
  spec.eps = eps;
  spec.lambda = lambda;
  std::vector<TestFunction> obs;
  for (const auto& x : xs) {
    if (static_cast<int>(x.size()) != spec.dim) throw ConfigError("tanaka x has the wrong dimension");
    obs.push_back(tanaka_observable(x, spec));
    obs.push_back(mollifier_observable(x, spec));
  }
  const auto levels = dt_levels(check);
  const auto reps = param<std::size_t>(check, "reps", 200);
  auto mu0 = initial_of(ctx, check);
  std::vector<std::vector<double>> full(xs.size()), ablated(xs.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    auto seed = derive_seed(ctx.seed, "tanaka_level_" + std::to_string(l));
    r.seeds.push_back(seed);
    auto rows = ensemble(ctx, level_config(check, levels[l], seed), mu0, obs, reps,
                         [&](const PathRecord& rec) {
                           std::vector<double> v;
                           for (const auto& x : xs) {
                             v.push_back(tanaka_residual(rec, ctx.model, x, eps, lambda));
                             v.push_back(tanaka_residual(rec, ctx.model, x, eps, lambda,
                                                         {false, true, true}));
                           }
                           return v;
                         });
    for (std::size_t i = 0; i < xs.size(); ++i) {
      std::vector<double> a, b;
      for (const auto& row : rows) {
        a.push_back(row[2 * i]);
        b.push_back(row[2 * i + 1]);
      }
      full[i].push_back(stats::mean(a).value);
      ablated[i].push_back(stats::mean(b).value);
    }
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    std::string at = "x=" + io::format_number(xs[i][0]);
    parts.slope(at + ":residual_decay", levels, full[i]);
    parts.slope(at + ":without_M_negative_control", levels, ablated[i], false);
  }
  r.reps = static_cast<std::int64_t>(reps * levels.size());
}

// ------------------------------------------------------------ local time

SimulationConfig path_config(const Json& check, std::uint64_t seed) {
  SimulationConfig c;
  c.n = param(check, "n", 6);
  c.theta = param(check, "theta", 2.0);
  c.horizon = param(check, "horizon", 0.5);
  c.dt = param(check, "dt", 1e-3);
  c.seed = seed;
  c.snapshot_stride = 1;
  c.track_martingales = false;
  c.branching = BranchingMode::bernoulli;
  return c;
}

void check_local_time_definition(const Context& ctx, const Json& check, CheckReport& r,
                                 Parts& parts) {
  const int d = ctx.model.dim();
  auto phi = TestFunction::compact_bump(std::vector<double>(d, 0.0), param(check, "radius", 2.0));
  auto eps = param(check, "eps", std::vector<double>{0.2, 0.1, 0.05});
  const int panels = param(check, "panels", 16);
  const auto paths = param<std::size_t>(check, "paths", 20);
  const double lo = param(check, "min_order", 0.5), hi = param(check, "max_order", 1.5);
  auto seed = derive_seed(ctx.seed, "local_time_paths");
  r.seeds = {seed};
  auto reports = ensemble(ctx, path_config(check, seed), initial_of(ctx, check), {}, paths,
                          [&](const PathRecord& rec) {
                            return occupation_consistency(rec, ctx.model, phi, eps, panels);
                          });
  for (std::size_t p = 0; p < reports.size(); ++p) {
    const auto& rep = reports[p];
    bool orders_ok = std::all_of(rep.orders.begin(), rep.orders.end(),
                                 [&](double o) { return o >= lo && o <= hi; });
    parts.flag("path_" + std::to_string(p),
               rep.monotone && orders_ok,
               {{"gap", rep.gap}, {"orders", rep.orders}, {"occupation", rep.occupation},
                {"monotone", rep.monotone}});
  }
  r.reps = static_cast<std::int64_t>(paths);
  r.detail["eps"] = eps;
  r.detail["order_window"] = {lo, hi};
}

void check_lambda_invariance(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  auto xs = param(check, "x", std::vector<std::vector<double>>{{0.0}, {1.0}});
  auto lambdas = param(check, "lambda", std::vector<double>{0.5, 1.0, 2.0});
  const double eps = param(check, "eps", 0.05);
  const auto paths = param<std::size_t>(check, "paths", 5);
  auto seed = derive_seed(ctx.seed, "lambda_invariance_paths");
  r.seeds = {seed};
  auto worst = ensemble(ctx, path_config(check, seed), initial_of(ctx, check), {}, paths,
                        [&](const PathRecord& rec) {
                          double w = 0.0;
                          for (const auto& x : xs) {
                            std::vector<double> forms;
                            double q = 0.0;
                            for (double lam : lambdas) {
                              auto est = local_time(rec, ctx.model, x, eps, lam);
                              forms.push_back(est.resolvent_form);
                              q = est.value;
                            }
                            for (double a : forms) {
                              w = std::max(w, std::abs(a - q));
                              for (double b : forms) w = std::max(w, std::abs(a - b));
                            }
                          }
                          return w;
                        });
  double w = *std::max_element(worst.begin(), worst.end());
  parts.tolerance("max_lambda_spread", w, param(check, "tolerance", 1e-6));
  r.reps = static_cast<std::int64_t>(paths);
  r.detail["per_path"] = worst;
}

// ------------------------------------------------------------ analytic checks

KernelSpec analytic_spec(const Json& check, int dim, double eps, double lambda) {
  KernelSpec s;
  s.dim = dim;
  s.eps = eps;
  s.lambda = lambda;
  s.sigma0_sq = param(check, "sigma0_sq", 2.0);
  return s;
}

void check_resolvent_identity(const Json& check, Parts& parts) {
  const double eps = param(check, "eps", 0.1);
  for (int d = 1; d <= 3; ++d) {
    auto grid = d == 1 ? axis_grid(1, -5.0, 5.0, 0.1) : axis_grid(d, 0.0, 3.0, 0.25);
    for (double lam : param(check, "lambda", std::vector<double>{0.5, 1.0, 2.0})) {
      double res = resolvent_identity_residual(analytic_spec(check, d, eps, lam), grid);
      parts.tolerance("d=" + std::to_string(d) + ",lambda=" + io::format_number(lam), res,
                      d == 1 ? 1e-6 : 1e-5);
    }
  }
}

void check_kernel_norms(const Json& check, Parts& parts) {
  const double lam = param(check, "lambda", 1.0);
  for (int d = 1; d <= 4; ++d) {
    auto spec = analytic_spec(check, d, 0.0, lam);
    for (const auto& e : norm_report(spec)) {
      std::string tag = "d=" + std::to_string(d) + ":" + e.name;
      Json info{{"value", e.value}, {"stable", e.stable}, {"divergent", e.divergent},
                {"refinement", e.refinement}};
      if (e.name == "Q_L1" && d <= 3) {
        parts.tolerance(tag + ":error", std::abs(e.value - 1.0 / lam), 1e-6,
                        {{"norm", e.value}, {"target", 1.0 / lam}});
      } else if (e.name == "Q_L2sq" && d == 1) {
        // Q^lambda(x) = exp(-k |x|) / (sigma_0 sqrt(2 lambda)), k = sqrt(2 lambda) / sigma_0
        const double s0 = std::sqrt(spec.sigma0_sq), k = std::sqrt(2 * lam) / s0;
        const double expected = 1.0 / (k * spec.sigma0_sq * 2 * lam);
        parts.tolerance(tag + ":error", std::abs(e.value - expected), 1e-6,
                        {{"norm", e.value}, {"target", expected}});
      } else if (e.name == "dQ_L2sq" && d == 1) {
        parts.flag(tag + ":finite_and_stable", e.stable && !e.divergent, info);
      } else if (e.name == "Q_L2sq" && d == 4) {
        parts.flag(tag + ":divergence_flagged", e.divergent || !e.stable, info);
      }
    }
  }
}

void check_chi(const Json& check, Parts& parts) {
  const double lam = param(check, "lambda", 1.0), t = param(check, "t", 1.0);
  for (int d = 1; d <= 4; ++d) {
    auto rep = chi_bound_check(d, t, lam);
    std::string tag = "d=" + std::to_string(d);
    if (d <= 3)
      parts.tolerance(tag + ":chi_over_bound", rep.chi, rep.bound);
    else
      parts.flag(tag + ":divergence_flagged", rep.divergent,
                 {{"chi", finite_or(rep.chi, 1e300)}, {"refinement", rep.refinement}});
  }
}

void check_ellipticity(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  const int configs = param(check, "configs", 200), particles = param(check, "particles", 10);
  const double spread = param(check, "spread", 3.0);
  const int d = ctx.model.dim();
  auto seed = derive_seed(ctx.seed, "ellipticity");
  r.seeds = {seed};
  double lmin = std::numeric_limits<double>::infinity();
  bool violated = false;
  for (int k = 0; k < configs; ++k) {
    RandomStream rng(seed, k);
    std::vector<double> pos(particles * d);
    for (auto& x : pos) x = spread * rng.normal();
    try {
      lmin = std::min(lmin, check_ellipticity(ctx.model, pos).lambda_min);
    } catch (const EllipticityViolation& e) {
      violated = true;
      lmin = std::min(lmin, e.lambda_min());
    }
  }
  parts.flag("random_configurations_elliptic", !violated && lmin > 0.0,
             {{"min_lambda_min", lmin}, {"configs", configs}});

  auto degenerate = make_model(d, ConstantC{Eigen::MatrixXd::Zero(d, d)}, ZeroH{}, 1.0,
                               OffspringLaw::critical_binary());
  bool rejected = false;
  std::string why;
  try {
    SimulationConfig c;
    c.horizon = 0.1;
    c.dt = 0.01;
    c.n = 2;
    simulate(c, degenerate, InitialMeasure::point_mass(std::vector<double>(d, 0.0)), {});
  } catch (const ModelError& e) {
    rejected = true;
    why = e.what();
  }
  parts.flag("zero_model_rejected", rejected, {{"message", why}});
  r.reps = configs;
}

void check_jump_chain(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  const auto chains = param<std::size_t>(check, "chains", 100000);
  const double gs2 = ctx.model.gamma() * ctx.model.offspring().sigma2();
  auto seed = derive_seed(ctx.seed, "jump_chain");
  r.seeds = {seed};
  std::vector<double> sojourn(chains);
  for (std::size_t k = 0; k < chains; ++k) {
    RandomStream rng(seed, k);
    auto run = sample_jump_chain(2, 1e12, gs2, rng);
    sojourn[k] = run.sojourn[2];
  }
  double D = stats::ks_exponential(sojourn, gs2);
  parts.tolerance("ks_sqrt_n_D", std::sqrt(static_cast<double>(chains)) * D, stats::ks_threshold_3sigma());
  r.reps = static_cast<std::int64_t>(chains);
  r.detail["rate"] = gs2;
  r.detail["D"] = D;
}

void check_criticality(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  ctx.model.offspring().check_critical();
  SimulationConfig c;
  c.n = param(check, "n", 6);
  c.theta = param(check, "theta", 2.0);
  c.horizon = param(check, "horizon", 0.5);
  c.dt = param(check, "dt", 0.01);
  c.branching = BranchingMode::exact_events;
  c.track_martingales = false;
  c.seed = derive_seed(ctx.seed, "criticality");
  r.seeds = {c.seed};
  const auto reps = param<std::size_t>(check, "reps", 400);
  auto mu0 = initial_of(ctx, check);
  auto mass = ensemble(ctx, c, mu0, {TestFunction::constant(ctx.model.dim())}, reps,
                       [](const PathRecord& rec) { return rec.series[0].value.back(); });
  auto m = stats::mean(mass);
  parts.z("mean_mass_at_horizon", m.value, m.se, mu0.total_mass());
  r.reps = static_cast<std::int64_t>(reps);
}

void check_null_set(const Context& ctx, const Json& check, CheckReport& r, Parts& parts) {
  const int d = ctx.model.dim();
  SimulationConfig c;
  c.n = param(check, "n", 6);
  c.theta = param(check, "theta", 2.0);
  c.horizon = param(check, "horizon", 0.5);
  c.dt = param(check, "dt", 0.01);
  c.branching = BranchingMode::exact_events;
  c.track_martingales = false;
  c.snapshot_stride = 1;
  c.seed = derive_seed(ctx.seed, "null_set");
  r.seeds = {c.seed};
  // The box starts `sds` envelope standard deviations sqrt(sigma_0^2 T) out.
  const double sd = std::sqrt(sigma0_sq_of(ctx.model) * c.horizon);
  const double sds = param(check, "sds", 8.0);
  std::vector<double> lo(d, -0.5), hi(d, 0.5);
  lo[0] = sds * sd;
  hi[0] = sds * sd + 1.0;
  const auto reps = param<std::size_t>(check, "reps", 50);
  auto sub = ensemble(ctx, c, initial_of(ctx, check), {}, reps,
                      [&](const PathRecord& rec) { return null_set_check(rec, lo, hi); });
  double worst = 0.0;
  int skipped = 0;
  for (const auto& s : sub) {
    worst = std::max(worst, s.statistic);
    skipped += s.skipped;
  }
  parts.flag("occupation_zero_in_all_replicates", worst == 0.0 && skipped == 0,
             {{"max_occupation", worst}, {"lo", lo}, {"hi", hi}, {"skipped", skipped}});
  r.reps = static_cast<std::int64_t>(reps);
}

}  // namespace

// ------------------------------------------------------------ public

Json to_json(const CheckReport& r, bool with_runtime) {
  Json j{{"id", r.id},       {"kind", r.kind},   {"statistic", r.statistic},
         {"expected", r.expected}, {"se", r.se}, {"score", r.score},
         {"pass", r.pass},   {"skipped", r.skipped}, {"error", r.error},
         {"reps", r.reps},   {"seeds", r.seeds}, {"detail", r.detail}};
  if (with_runtime) j["runtime_s"] = r.runtime_s;
  return j;
}

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> ids{
      "model_validation",       "first_moment_duality", "second_moment_duality",
      "criticality_mass_variance", "spde_decomposition", "resolvent_identity",
      "kernel_norms",           "chi_bound",            "tanaka",
      "local_time_definition",  "lambda_invariance",    "ellipticity_gate",
      "dual_jump_chain",        "criticality",          "null_set",
      "calibration"};
  return ids;
}

CheckReport null_set_check(const PathRecord& record, const std::vector<double>& lo,
                           const std::vector<double>& hi) {
  CheckReport r;
  r.id = "null_set";
  r.kind = "flag";
  r.seeds = {record.seed};
  r.reps = 1;
  r.detail = {{"lo", lo}, {"hi", hi}};
  const int d = record.dim;
  if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d) {
    r.error = "region dimension does not match the record";
    return r;
  }
  auto inside = [&](std::span<const double> x) {
    for (int p = 0; p < d; ++p)
      if (x[p] < lo[p] || x[p] > hi[p]) return false;
    return true;
  };
  if (record.snapshots.empty()) {
    r.skipped = true;
    r.pass = true;
    r.detail["reason"] = "no snapshots";
    return r;
  }
  const auto& first = record.snapshots.front().positions;
  for (std::size_t k = 0; k < first.size() / d; ++k) {
    if (inside(std::span<const double>(first).subspan(k * d, d))) {
      r.skipped = true;
      r.pass = true;
      r.detail["reason"] = "region overlaps the support of the initial measure";
      return r;
    }
  }
  std::vector<double> t, occ;
  for (const auto& s : record.snapshots) {
    std::size_t count = 0;
    for (std::size_t k = 0; k < s.positions.size() / d; ++k)
      count += inside(std::span<const double>(s.positions).subspan(k * d, d));
    t.push_back(s.time);
    occ.push_back(record.mass * static_cast<double>(count));
  }
  r.statistic = t.size() > 1 ? quad::trapezoid(t, occ) : 0.0;
  r.expected = 0.0;
  r.pass = r.statistic == 0.0;
  r.score = r.pass ? 0.0 : 1.0;
  return r;
}

CheckReport calibration_self_test(std::uint64_t seed, int checks, int samples) {
  CheckReport r;
  r.id = "calibration";
  r.seeds = {seed};
  r.reps = checks;
  Parts parts(r);
  int passed = 0;
  std::vector<double> x(samples);
  for (int k = 0; k < checks; ++k) {
    RandomStream rng(seed, k);
    for (auto& v : x) v = rng.normal();
    auto m = stats::mean(x);
    passed += std::abs(stats::z_score(m.value, m.se, 0.0)) <= 3.0;
  }
  const double frac = static_cast<double>(passed) / checks;
  parts.tolerance("failure_fraction", 1.0 - frac, 0.01);
  r.detail["pass_fraction"] = frac;
  parts.finish();
  return r;
}

std::vector<CheckReport> run_suite(const Json& manifest, int workers) {
  std::vector<CheckReport> out;
  const Json checks = manifest.contains("checks") ? manifest["checks"] : Json::array();
  if (!checks.is_array()) throw ConfigError("manifest \"checks\" must be a list");
  if (checks.empty()) return out;
  if (workers <= 0) workers = manifest.contains("workers") ? manifest["workers"].get<int>() : 0;
  if (workers <= 0) workers = default_workers();
  const std::uint64_t seed = manifest.contains("seed") ? manifest["seed"].get<std::uint64_t>() : 0;
  const Json model_json = manifest.contains("model") ? manifest["model"] : Json{{"preset", "reference"}};

  std::optional<ModelCoefficients> model;
  {
    CheckReport r;
    r.id = "model_validation";
    auto t0 = std::chrono::steady_clock::now();
    Parts parts(r);
    try {
      model.emplace(io::model_from_json(model_json));
      auto rep = validate_model(*model, derive_seed(seed, "model_validation"));
      parts.flag("hypotheses", true,
                 {{"min_gamma_eigenvalue", rep.min_gamma_eigenvalue},
                  {"max_rho_closed_form_error", rep.max_rho_closed_form_error}});
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    parts.finish();
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }

  std::map<std::string, MomentEnsemble> moment_cache;
  for (const auto& check : checks) {
    CheckReport r;
    r.id = check.is_object() && check.contains("id") ? check["id"].get<std::string>() : "";
    auto t0 = std::chrono::steady_clock::now();
    Parts parts(r);
    try {
      if (r.id.empty()) throw ConfigError("check entry without an id");
      if (r.id == "model_validation") continue;
      if (std::find(known_checks().begin(), known_checks().end(), r.id) == known_checks().end())
        throw ConfigError("unknown check id: " + r.id);
      const bool needs_model = r.id != "resolvent_identity" && r.id != "kernel_norms" &&
                               r.id != "chi_bound" && r.id != "calibration";
      if (needs_model && !model) throw ModelError("model could not be built: " + out.front().error);
      if (needs_model && !out.front().pass)
        throw ModelError("model failed validation: " + out.front().error);
      if (r.id == "calibration") {
        auto c = calibration_self_test(derive_seed(seed, "calibration"), param(check, "checks", 2000),
                                       param(check, "samples", 64));
        c.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.push_back(std::move(c));
        continue;
      }
      if (r.id == "resolvent_identity") {
        check_resolvent_identity(check, parts);
      } else if (r.id == "kernel_norms") {
        check_kernel_norms(check, parts);
      } else if (r.id == "chi_bound") {
        check_chi(check, parts);
      } else {
        Context ctx{manifest, *model, seed, workers};
        if (r.id == "first_moment_duality" || r.id == "second_moment_duality" ||
            r.id == "criticality_mass_variance") {
          auto key = moment_key(check);
          auto it = moment_cache.find(key);
          if (it == moment_cache.end()) {
            it = moment_cache.emplace(key, run_moment_ensemble(ctx, check)).first;
            r.detail["ensemble"] = "computed";
          } else {
            r.detail["ensemble"] = "shared";
          }
          if (r.id == "first_moment_duality") check_first_moment(ctx, check, it->second, r, parts);
          if (r.id == "second_moment_duality") check_second_moment(ctx, check, it->second, r, parts);
          if (r.id == "criticality_mass_variance")
            check_criticality_variance(ctx, check, it->second, r, parts);
        } else if (r.id == "spde_decomposition") {
          check_spde(ctx, check, r, parts);
        } else if (r.id == "tanaka") {
          check_tanaka(ctx, check, r, parts);
        } else if (r.id == "local_time_definition") {
          check_local_time_definition(ctx, check, r, parts);
        } else if (r.id == "lambda_invariance") {
          check_lambda_invariance(ctx, check, r, parts);
        } else if (r.id == "ellipticity_gate") {
          check_ellipticity(ctx, check, r, parts);
        } else if (r.id == "dual_jump_chain") {
          check_jump_chain(ctx, check, r, parts);
        } else if (r.id == "criticality") {
          check_criticality(ctx, check, r, parts);
        } else if (r.id == "null_set") {
          check_null_set(ctx, check, r, parts);
        }
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    parts.finish();
    r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_table(const std::vector<CheckReport>& reports) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-11s %-6s %14s %14s %10s %8s %9s\n", "check", "kind",
                "result", "statistic", "expected", "score", "reps", "seconds");
  os << line;
  for (const auto& r : reports) {
    const char* result = r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL");
    std::snprintf(line, sizeof line, "%-28s %-11s %-6s %14.6g %14.6g %10.3g %8lld %9.2f\n",
                  r.id.c_str(), r.kind.c_str(), result, r.statistic, r.expected, r.score,
                  static_cast<long long>(r.reps), r.runtime_s);
    os << line;
    if (!r.error.empty()) os << "    error: " << r.error << "\n";
  }
  return os.str();
}

}  // namespace sdsm
