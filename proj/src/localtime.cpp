#include "sdsm/localtime.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "sdsm/errors.hpp"
#include "sdsm/quadrature.hpp"

namespace sdsm {

namespace {

KernelSpec kernel_spec(const ModelCoefficients& model, double eps, double lambda) {
  if (model.dim() >= 4)
    throw DomainError("local time is only defined here for d = 1, 2, 3");
  auto s0 = constant_effective_diffusion(model);
  if (!s0) throw ConfigError("local time needs a constant scalar effective diffusion");
  KernelSpec spec;
  spec.dim = model.dim();
  spec.eps = eps;
  spec.lambda = lambda;
  spec.sigma0_sq = *s0;
  spec.validate();
  if (!(eps > 0.0)) throw ConfigError("local time needs eps > 0");
  return spec;
}

std::string point_label(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t p = 0; p < x.size(); ++p) os << (p ? "," : "") << x[p];
  return os.str();
}

bool same_point(const std::vector<double>& a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t p = 0; p < a.size(); ++p)
    if (a[p] != b[p]) return false;
  return true;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

const ObservableSeries* find_series(const PathRecord& record, TestFunction::Family family,
                                    std::span<const double> x, const std::vector<double>& params) {
  for (std::size_t i = 0; i < record.observables.size(); ++i) {
    const auto& f = record.observables[i];
    if (f.family() != family || !same_point(f.center(), x)) continue;
    const auto& fp = f.parameters();
    bool match = fp.size() == params.size();
    for (std::size_t k = 0; match && k < params.size(); ++k) match = close(fp[k], params[k]);
    if (match) return &record.series[i];
  }
  return nullptr;
}

double trapezoid_uniform(const std::vector<double>& y, double dt) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < y.size(); ++k) s += 0.5 * (y[k] + y[k + 1]) * dt;
  return s;
}

std::vector<double> snapshot_series(const PathRecord& record,
                                    const std::function<double(std::span<const double>)>& f) {
  std::vector<double> out;
  const int d = record.dim;
  for (const auto& snap : record.snapshots) {
    double s = 0.0;
    std::size_t m = snap.positions.size() / d;
    for (std::size_t k = 0; k < m; ++k)
      s += f(std::span<const double>(snap.positions).subspan(k * d, d));
    out.push_back(s * record.mass);
  }
  return out;
}

void require_points(const PathRecord& record, std::span<const double> x) {
  if (static_cast<int>(x.size()) != record.dim)
    throw ConfigError("evaluation point dimension does not match the record");
}

}  // namespace

TestFunction tanaka_observable(std::vector<double> x, const KernelSpec& spec) {
  std::string label = "psi[" + point_label(x) + "]";
  auto f = TestFunction::resolvent_kernel(std::move(x), spec);
  std::ostringstream os;
  os << label << "[eps=" << spec.eps << ",lambda=" << spec.lambda << "]";
  f.set_name(os.str());
  return f;
}

TestFunction mollifier_observable(std::vector<double> x, const KernelSpec& spec) {
  std::string label = "q[" + point_label(x) + "]";
  auto f = TestFunction::heat_mollifier(std::move(x), spec);
  std::ostringstream os;
  os << label << "[eps=" << spec.eps << "]";
  f.set_name(os.str());
  return f;
}

std::vector<double> local_time_series(const PathRecord& record, const ModelCoefficients& model,
                                      std::span<const double> x, double eps) {
  KernelSpec spec = kernel_spec(model, eps, 1.0);
  require_points(record, x);
  std::vector<double> values;
  double dt = record.dt;
  if (const auto* s = find_series(record, TestFunction::Family::heat_mollifier, x,
                                  {spec.eps, spec.sigma0_sq})) {
    values = s->value;
  } else if (record.has_full_snapshots()) {
    auto q = TestFunction::heat_mollifier(std::vector<double>(x.begin(), x.end()), spec);
    values = snapshot_series(record, [&](std::span<const double> z) { return q.value(z); });
  } else {
    throw ConfigError("local time needs a registered mollifier observable or full snapshots");
  }
  std::vector<double> out{0.0};
  for (std::size_t k = 0; k + 1 < values.size(); ++k)
    out.push_back(out.back() + 0.5 * (values[k] + values[k + 1]) * dt);
  return out;
}

LocalTimeEstimate local_time(const PathRecord& record, const ModelCoefficients& model,
                             std::span<const double> x, double eps, double lambda) {
  KernelSpec spec = kernel_spec(model, eps, lambda);
  require_points(record, x);
  LocalTimeEstimate est;
  est.x.assign(x.begin(), x.end());
  est.t = record.times.back();
  est.eps = eps;
  est.lambda = lambda;
  est.value = local_time_series(record, model, x, eps).back();

  const double D = spec.diffusivity();
  const auto* psi = find_series(record, TestFunction::Family::resolvent_kernel, x,
                                {spec.lambda, spec.eps, spec.sigma0_sq});
  if (record.has_full_snapshots()) {
    auto kernel = TestFunction::resolvent_kernel(est.x, spec);
    auto series = snapshot_series(record, [&](std::span<const double> z) {
      Jet j = kernel.jet(z);
      double lap = 0.0;
      for (int p = 0; p < spec.dim; ++p) lap += j.hessian(p, p);
      return lambda * j.value - D * lap;
    });
    est.resolvent_form = trapezoid_uniform(series, record.dt);
  } else if (psi && record.track_martingales) {
    est.resolvent_form = lambda * psi->occupation.back() - trapezoid_uniform(psi->generator, record.dt);
  } else {
    est.resolvent_form = std::numeric_limits<double>::quiet_NaN();
  }
  est.form_difference = est.value - est.resolvent_form;
  return est;
}

LocalTimeEstimate tanaka_rhs(const PathRecord& record, const ModelCoefficients& model,
                             std::span<const double> x, double eps, double lambda,
                             const TanakaOptions& options) {
  KernelSpec spec = kernel_spec(model, eps, lambda);
  require_points(record, x);
  const auto* psi = find_series(record, TestFunction::Family::resolvent_kernel, x,
                                {spec.lambda, spec.eps, spec.sigma0_sq});
  if (!psi || !record.track_martingales)
    throw ConfigError("tanaka_rhs needs psi = Q^lambda_eps(x - .) registered with tracking on");

  LocalTimeEstimate est;
  bool have_q = record.has_full_snapshots() ||
                find_series(record, TestFunction::Family::heat_mollifier, x,
                            {spec.eps, spec.sigma0_sq}) != nullptr;
  if (have_q) {
    est = local_time(record, model, x, eps, lambda);
  } else {
    est.x.assign(x.begin(), x.end());
    est.t = record.times.back();
    est.eps = eps;
    est.lambda = lambda;
    est.resolvent_form = lambda * psi->occupation.back() - trapezoid_uniform(psi->generator, record.dt);
    est.value = est.resolvent_form;
    est.form_difference = 0.0;
  }
  est.initial_mass = psi->value.front();
  est.terminal_mass = psi->value.back();
  est.lambda_integral = lambda * psi->occupation.back();
  est.common_noise = psi->X.back();
  est.branching = psi->M.back();
  est.individual_noise = psi->U.back();
  est.discrete_qv = psi->Qd.back();
  est.rhs = est.initial_mass - est.terminal_mass + est.lambda_integral + est.common_noise;
  if (options.include_branching) est.rhs += est.branching;
  if (options.include_individual) est.rhs += est.individual_noise;
  if (options.include_discrete_qv) est.rhs += est.discrete_qv;
  return est;
}

double tanaka_residual(const PathRecord& record, const ModelCoefficients& model,
                       std::span<const double> x, double eps, double lambda,
                       const TanakaOptions& options) {
  auto est = tanaka_rhs(record, model, x, eps, lambda, options);
  return std::abs(est.value - est.rhs);
}

OccupationReport occupation_consistency(const PathRecord& record, const ModelCoefficients& model,
                                        const TestFunction& phi, const std::vector<double>& eps,
                                        int panels_per_axis) {
  if (!record.has_full_snapshots())
    throw ConfigError("occupation consistency needs snapshots at every step");
  if (!std::isfinite(phi.support_radius()))
    throw ConfigError("occupation consistency needs a compactly supported test function");
  if (phi.dim() != record.dim) throw ConfigError("test function dimension does not match the record");
  const int d = record.dim;
  const double R = phi.support_radius();
  const auto& c = phi.center();

  // Tensor Gauss-Legendre nodes over the support box, keeping phi != 0.
  auto rule = quad::gauss_legendre(-R, R, panels_per_axis);
  const std::size_t n1 = rule.nodes.size();
  std::vector<double> nodes, weights;
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> pt(d);
  for (;;) {
    double w = 1.0;
    for (int p = 0; p < d; ++p) {
      pt[p] = c[p] + rule.nodes[idx[p]];
      w *= rule.weights[idx[p]];
    }
    double v = phi.value(pt);
    if (v != 0.0) {
      nodes.insert(nodes.end(), pt.begin(), pt.end());
      weights.push_back(w * v);
    }
    int p = 0;
    while (p < d && ++idx[p] == n1) idx[p++] = 0;
    if (p == d) break;
  }
  const std::size_t nn = weights.size();

  OccupationReport rep;
  rep.eps = eps;
  auto phi_series = snapshot_series(record, [&](std::span<const double> z) { return phi.value(z); });
  rep.occupation = trapezoid_uniform(phi_series, record.dt);

  rep.kernel_mass_ok = true;
  const double panel = 2.0 * R / panels_per_axis;
  for (double e : eps) {
    KernelSpec spec = kernel_spec(model, e, 1.0);
    double sd = std::sqrt(spec.sigma0_sq * e);
    // The panel width must resolve q_eps: its 1-d integral over +-6 sd on
    // panels of the same width has to come out as 1.
    int k = std::max(1, static_cast<int>(std::ceil(12.0 * sd / panel)));
    double mass1 = quad::integrate(
        [&](double u) { return std::exp(-u * u / (2 * sd * sd)) / std::sqrt(2 * M_PI * sd * sd); },
        -6 * sd, 6 * sd, k);
    if (std::abs(mass1 - (1.0 - std::erfc(6.0 / std::sqrt(2.0)))) > 1e-6) rep.kernel_mass_ok = false;

    const double inv = 1.0 / (2.0 * sd * sd);
    const double norm = std::pow(2.0 * M_PI * sd * sd, -0.5 * d);
    auto series = snapshot_series(record, [&](std::span<const double> z) {
      double s = 0.0;
      for (std::size_t i = 0; i < nn; ++i) {
        double r2 = 0.0;
        for (int p = 0; p < d; ++p) {
          double dx = nodes[i * d + p] - z[p];
          r2 += dx * dx;
        }
        s += weights[i] * std::exp(-r2 * inv);
      }
      return norm * s;
    });
    double smoothed = trapezoid_uniform(series, record.dt);
    rep.smoothed.push_back(smoothed);
    rep.gap.push_back(smoothed - rep.occupation);
  }
  if (!rep.kernel_mass_ok) throw ConfigError("grid too coarse to resolve q_eps; raise panels_per_axis");
  rep.monotone = true;
  for (std::size_t i = 0; i + 1 < rep.gap.size(); ++i) {
    rep.orders.push_back(std::log(std::abs(rep.gap[i] / rep.gap[i + 1])) / std::log(eps[i] / eps[i + 1]));
    if (!(std::abs(rep.gap[i + 1]) < std::abs(rep.gap[i]))) rep.monotone = false;
  }
  return rep;
}

Extrapolation extrapolate_local_time(const PathRecord& record, const ModelCoefficients& model,
                                     std::span<const double> x, const std::vector<double>& eps) {
  if (eps.size() < 2) throw ConfigError("extrapolation needs at least two eps values");
  Extrapolation ex;
  ex.eps = eps;
  for (double e : eps) ex.values.push_back(local_time_series(record, model, x, e).back());
  std::vector<double> limits;
  for (std::size_t i = 0; i + 1 < eps.size(); ++i)
    limits.push_back((eps[i + 1] * ex.values[i] - eps[i] * ex.values[i + 1]) / (eps[i + 1] - eps[i]));
  ex.limit = limits.back();
  ex.error = limits.size() >= 2 ? std::abs(limits.back() - limits[limits.size() - 2])
                                : std::numeric_limits<double>::quiet_NaN();
  return ex;
}

}  // namespace sdsm
