#include "sdsm/green.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sdsm/errors.hpp"
#include "sdsm/quadrature.hpp"

namespace sdsm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = std::numbers::egamma;
// exp(-kExpCut) is treated as zero in truncated integrals.
constexpr double kExpCut = 750.0;

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

void check_dim(std::span<const double> x, int dim) {
  if (static_cast<int>(x.size()) != dim)
    throw std::invalid_argument("point dimension does not match kernel dimension");
}

// exp(z^2) erfc(z) for z >= 0.
double erfcx(double z) {
  if (z < 26.0) return std::exp(z * z) * std::erfc(z);
  double iz2 = 1.0 / (z * z);
  double series = 1.0 - 0.5 * iz2 + 0.75 * iz2 * iz2 - 1.875 * iz2 * iz2 * iz2 +
                  6.5625 * iz2 * iz2 * iz2 * iz2;
  return series / (z * std::sqrt(kPi));
}

double sphere_area(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    case 3: return 4.0 * kPi;
    case 4: return 2.0 * kPi * kPi;
  }
  throw std::invalid_argument("dimension must be 1..4");
}

double bessel_k_integral(double x, double nu) {
  // K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt; the trapezoidal rule
  // converges geometrically for this integrand.
  const double h = 0.05;
  double t_max = std::acosh(1.0 + kExpCut / x);
  double sum = 0.5 * std::exp(-x);
  for (double t = h; t <= t_max; t += h) sum += std::exp(-x * std::cosh(t)) * std::cosh(nu * t);
  return h * sum;
}

double bessel_k_asymptotic(double x, double nu) {
  double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 40; ++k) {
    double next = term * (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return std::sqrt(kPi / (2.0 * x)) * std::exp(-x) * sum;
}

}  // namespace

double KernelSpec::decay_rate() const { return std::sqrt(lambda / diffusivity()); }

void KernelSpec::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(eps >= 0.0)) throw std::invalid_argument("eps must be non-negative");
  if (!(sigma0_sq > 0.0)) throw std::invalid_argument("sigma0^2 must be positive (ellipticity)");
  if (dim < 1 || dim > 4) throw std::invalid_argument("dimension must be 1..4");
}

double bessel_k0(double x) {
  if (!(x > 0.0)) throw DomainError("K0 needs a positive argument");
  if (x <= 2.0) {
    double y = 0.25 * x * x;
    double term = 1.0, sum_i = 1.0, sum_k = 0.0, harmonic = 0.0;
    for (int k = 1; k < 60; ++k) {
      term *= y / (double(k) * k);
      harmonic += 1.0 / k;
      sum_i += term;
      sum_k += term * harmonic;
      if (term < 1e-18 * sum_i) break;
    }
    return -(std::log(0.5 * x) + kEulerGamma) * sum_i + sum_k;
  }
  if (x <= 30.0) return bessel_k_integral(x, 0.0);
  return bessel_k_asymptotic(x, 0.0);
}

double bessel_k1(double x) {
  if (!(x > 0.0)) throw DomainError("K1 needs a positive argument");
  if (x <= 2.0) {
    double y = 0.25 * x * x;
    // term_k = y^k / (k! (k+1)!)
    double term = 1.0, sum_i = 1.0;
    double psi_sum = -2.0 * kEulerGamma + 1.0;  // psi(1) + psi(2)
    double sum_psi = psi_sum;
    for (int k = 1; k < 60; ++k) {
      term *= y / (double(k) * (k + 1));
      psi_sum += 1.0 / k + 1.0 / (k + 1);
      sum_i += term;
      sum_psi += term * psi_sum;
      if (term < 1e-18 * sum_i) break;
    }
    double i1 = 0.5 * x * sum_i;
    return 1.0 / x + std::log(0.5 * x) * i1 - 0.25 * x * sum_psi;
  }
  if (x <= 30.0) return bessel_k_integral(x, 1.0);
  return bessel_k_asymptotic(x, 1.0);
}

double heat_kernel_radial(int dim, double sigma0_sq, double t, double r) {
  if (!(t > 0.0)) throw std::invalid_argument("heat kernel needs t > 0");
  double v = sigma0_sq * t;
  return std::pow(2.0 * kPi * v, -0.5 * dim) * std::exp(-r * r / (2.0 * v));
}

double heat_kernel(const KernelSpec& spec, double t, std::span<const double> x) {
  check_dim(x, spec.dim);
  return heat_kernel_radial(spec.dim, spec.sigma0_sq, t, norm2(x));
}

double laplace_heat_integral(const KernelSpec& spec, double r, HeatTerm term) {
  spec.validate();
  const double D = spec.diffusivity();
  const double lam = spec.lambda;
  const int d = spec.dim;
  r = std::abs(r);
  if (spec.eps == 0.0 && r == 0.0 && (d >= 2 || term != HeatTerm::value))
    throw DomainError("kernel is singular at the origin for eps = 0");

  auto integrand = [&](double u) {
    double t = std::exp(u);
    double q = std::pow(4.0 * kPi * D * t, -0.5 * d) * std::exp(-r * r / (4.0 * D * t));
    double factor = 1.0;
    switch (term) {
      case HeatTerm::value: break;
      case HeatTerm::radial_derivative: factor = -r / (2.0 * D * t); break;
      case HeatTerm::radial_derivative_over_r: factor = -1.0 / (2.0 * D * t); break;
      case HeatTerm::radial_second_derivative:
        factor = r * r / (4.0 * D * D * t * t) - 1.0 / (2.0 * D * t);
        break;
      case HeatTerm::laplacian:
        factor = r * r / (4.0 * D * D * t * t) - d / (2.0 * D * t);
        break;
    }
    return std::exp(-lam * (t - spec.eps)) * q * factor * t;
  };

  double t_lo = spec.eps > 0.0 ? spec.eps : (r > 0.0 ? r * r / (4.0 * D * kExpCut) : 1e-32);
  double t_hi = spec.eps + kExpCut / lam;
  std::vector<std::pair<double, double>> pieces;
  if (t_lo < 1.0 && t_hi > 1.0) {
    pieces = {{std::log(t_lo), 0.0}, {0.0, std::log(t_hi)}};
  } else {
    pieces = {{std::log(t_lo), std::log(t_hi)}};
  }

  double total = 0.0;
  for (auto [a, b] : pieces) {
    double scale = quad::integrate([&](double u) { return std::abs(integrand(u)); }, a, b, 32);
    auto res = quad::integrate_refined(integrand, a, b, 1e-12, scale, 8, 8192);
    if (!res.converged)
      throw QuadratureError("Laplace integral of the heat kernel did not settle");
    total += res.value;
  }
  return total;
}

double q_lambda_radial(const KernelSpec& spec, double r) {
  spec.validate();
  r = std::abs(r);
  const double D = spec.diffusivity();
  const double k = spec.decay_rate();
  if (spec.dim >= 2 && r == 0.0) throw DomainError("Q^lambda is singular at x = 0 for d >= 2");
  switch (spec.dim) {
    case 1: return std::exp(-k * r) / (2.0 * std::sqrt(spec.lambda * D));
    case 2: return bessel_k0(k * r) / (2.0 * kPi * D);
    case 3: return std::exp(-k * r) / (4.0 * kPi * D * r);
    default: return k * bessel_k1(k * r) / (4.0 * kPi * kPi * D * r);
  }
}

double q_lambda_radial_derivative(const KernelSpec& spec, double r) {
  spec.validate();
  r = std::abs(r);
  const double D = spec.diffusivity();
  const double k = spec.decay_rate();
  if (r == 0.0) throw DomainError("dQ^lambda/dr is undefined at r = 0");
  switch (spec.dim) {
    case 1: return -k * q_lambda_radial(spec, r);
    case 2: return -k * bessel_k1(k * r) / (2.0 * kPi * D);
    case 3: return -(k + 1.0 / r) * q_lambda_radial(spec, r);
    default:
      return k / (4.0 * kPi * kPi * D) *
             (-k * bessel_k0(k * r) / r - 2.0 * bessel_k1(k * r) / (r * r));
  }
}

double q_lambda(const KernelSpec& spec, std::span<const double> x) {
  check_dim(x, spec.dim);
  return q_lambda_radial(spec, norm2(x));
}

ResolventKernel::ResolventKernel(KernelSpec spec) : spec_(spec) {
  spec_.validate();
  if (!(spec_.eps > 0.0)) throw std::invalid_argument("Q^lambda_eps needs eps > 0");
}

RadialJet ResolventKernel::closed_form_1d(double r) const {
  // Q_eps(x) = e^{lambda eps} C0 [e^{-kx} erfc(b - a) + e^{kx} erfc(a + b)]
  // with a = x / (2 sqrt(D eps)), b = sqrt(lambda eps), C0 = 1 / (4 sqrt(lambda D)).
  const double D = spec_.diffusivity();
  const double k = spec_.decay_rate();
  const double s = std::sqrt(D * spec_.eps);
  const double a = r / (2.0 * s);
  const double b = std::sqrt(spec_.lambda * spec_.eps);
  const double c0 = 1.0 / (4.0 * std::sqrt(spec_.lambda * D));
  const double ga = std::exp(-a * a);
  // e1, e2 carry the e^{lambda eps} prefactor.
  double e1 = b >= a ? ga * erfcx(b - a) : std::exp(b * (b - 2.0 * a)) * std::erfc(b - a);
  double e2 = ga * erfcx(a + b);
  double da = 1.0 / (2.0 * s);
  RadialJet jet;
  jet.f = c0 * (e1 + e2);
  jet.f1 = c0 * k * (e2 - e1);
  jet.f2 = c0 * (k * k * (e1 + e2) - 4.0 * k * da * ga / std::sqrt(kPi));
  jet.f1_over_r = r > 1e-8 ? jet.f1 / r : jet.f2;
  return jet;
}

RadialJet ResolventKernel::profile(double r) const {
  r = std::abs(r);
  if (spec_.dim == 1) return closed_form_1d(r);
  RadialJet jet;
  jet.f = laplace_heat_integral(spec_, r, HeatTerm::value);
  jet.f1 = laplace_heat_integral(spec_, r, HeatTerm::radial_derivative);
  jet.f2 = laplace_heat_integral(spec_, r, HeatTerm::radial_second_derivative);
  jet.f1_over_r = laplace_heat_integral(spec_, r, HeatTerm::radial_derivative_over_r);
  return jet;
}

double ResolventKernel::value(std::span<const double> x) const {
  check_dim(x, spec_.dim);
  double r = norm2(x);
  if (spec_.dim == 1) return closed_form_1d(r).f;
  return laplace_heat_integral(spec_, r, HeatTerm::value);
}

std::vector<double> ResolventKernel::gradient(std::span<const double> x) const {
  check_dim(x, spec_.dim);
  double r = norm2(x);
  double g = spec_.dim == 1
                 ? closed_form_1d(r).f1_over_r
                 : laplace_heat_integral(spec_, r, HeatTerm::radial_derivative_over_r);
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v *= g;
  return out;
}

double ResolventKernel::laplacian(std::span<const double> x) const {
  check_dim(x, spec_.dim);
  double r = norm2(x);
  if (spec_.dim == 1) return closed_form_1d(r).f2;
  return laplace_heat_integral(spec_, r, HeatTerm::laplacian);
}

double q_lambda_eps(const KernelSpec& spec, std::span<const double> x) {
  return ResolventKernel(spec).value(x);
}

std::vector<double> grad_q_lambda_eps(const KernelSpec& spec, std::span<const double> x) {
  return ResolventKernel(spec).gradient(x);
}

double q_lambda_eps_convolution_1d(const KernelSpec& spec, double x) {
  spec.validate();
  if (spec.dim != 1) throw std::invalid_argument("convolution route is implemented for d = 1");
  if (!(spec.eps > 0.0)) throw std::invalid_argument("Q^lambda_eps needs eps > 0");
  KernelSpec bare = spec;
  bare.eps = 0.0;
  const double L = std::sqrt(4.0 * spec.diffusivity() * spec.eps * kExpCut);
  auto f = [&](double y) {
    return q_lambda_radial(bare, x - y) *
           heat_kernel_radial(1, spec.sigma0_sq, spec.eps, y);
  };
  double total = 0.0;
  // Q^lambda has a kink at y = x; integrate each smooth side separately.
  double split = std::clamp(x, -L, L);
  for (auto [a, b] : {std::pair{-L, split}, std::pair{split, L}}) {
    if (b <= a) continue;
    auto res = quad::integrate_refined(f, a, b, 1e-13, 1e-300, 8, 8192);
    if (!res.converged) throw QuadratureError("convolution integral did not settle");
    total += res.value;
  }
  return total;
}

double mollifier(const KernelSpec& spec, std::span<const double> x) {
  return heat_kernel(spec, spec.eps, x);
}

double resolvent_identity_residual(const KernelSpec& spec,
                                   const std::vector<std::vector<double>>& grid,
                                   double mollifier_time_factor) {
  ResolventKernel kernel(spec);
  const double D = spec.diffusivity();
  double worst = 0.0;
  for (const auto& x : grid) {
    double lhs = spec.lambda * kernel.value(x) - D * kernel.laplacian(x);
    double rhs = heat_kernel(spec, spec.eps * mollifier_time_factor, x);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

std::vector<std::vector<double>> axis_grid(int dim, double lo, double hi, double step) {
  std::vector<std::vector<double>> grid;
  int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) {
    std::vector<double> x(dim, 0.0);
    x[0] = lo + i * step;
    grid.push_back(std::move(x));
  }
  return grid;
}

namespace {

// Shared refinement over a shrinking inner cutoff: `piece(lo, hi)` integrates
// over [lo, hi] in log scale. Returns the cumulative sequence.
struct CutoffRefinement {
  std::vector<double> values;
  bool stable = false;
  bool divergent = false;
};

CutoffRefinement refine_inner_cutoff(const std::function<double(double, double)>& piece,
                                     double outer, int decades) {
  CutoffRefinement out;
  double lo = std::log(0.1);
  double value = piece(lo, std::log(outer));
  out.values.push_back(value);
  for (int k = 2; k <= decades; ++k) {
    double next_lo = lo - std::log(10.0);
    value += piece(next_lo, lo);
    lo = next_lo;
    out.values.push_back(value);
  }
  size_t n = out.values.size();
  double last = std::abs(out.values[n - 1] - out.values[n - 2]);
  double prev = std::abs(out.values[n - 2] - out.values[n - 3]);
  out.stable = last <= 1e-6 * std::abs(out.values.back());
  out.divergent = !out.stable && last > 0.5 * prev;
  return out;
}

double log_piece(const std::function<double(double)>& f, double a, double b) {
  auto res = quad::integrate_refined(f, a, b, 1e-13, 1e-300, 4, 4096);
  if (!res.converged) throw QuadratureError("radial integral did not settle");
  return res.value;
}

}  // namespace

ChiBoundReport chi_bound_check(int dim, double t, double lambda) {
  if (dim < 1 || dim > 4) throw std::invalid_argument("dimension must be 1..4");
  if (!(t > 0.0) || !(lambda > 0.0)) throw std::invalid_argument("t and lambda must be positive");

  // chi_d(t) = pi int_0^inf e^{-lambda s} I_d(s) ds with s = w^2, integrated in log w.
  auto inner = [dim, t](double s) {
    double a = std::sqrt(s), b = std::sqrt(2.0 * t + s);
    switch (dim) {
      case 1: return 2.0 * t / (a + b);
      case 2: return 0.5 * std::log1p(2.0 * t / s);
      case 3: return 2.0 * t / (a * b * (a + b));
      default: return t / (s * (2.0 * t + s));
    }
  };
  auto f = [&](double v) {
    double w2 = std::exp(2.0 * v);
    return kPi * 2.0 * w2 * std::exp(-lambda * w2) * inner(w2);
  };
  auto piece = [&](double a, double b) { return log_piece(f, a, b); };

  ChiBoundReport rep;
  rep.dim = dim;
  rep.t = t;
  rep.lambda = lambda;
  auto seq = refine_inner_cutoff(piece, std::sqrt(kExpCut / lambda), 12);
  rep.refinement = seq.values;
  rep.chi = seq.values.back();
  rep.bound = (t + 1.0) * kPi * std::sqrt(kPi / lambda);
  rep.divergent = seq.divergent;
  if (dim <= 3) {
    if (!seq.stable) throw QuadratureError("chi_d refinement did not settle for d <= 3");
    rep.pass = rep.chi <= rep.bound;
  } else {
    rep.pass = rep.divergent;
  }
  return rep;
}

std::vector<NormEntry> norm_report(const KernelSpec& spec) {
  spec.validate();
  KernelSpec bare = spec;
  bare.eps = 0.0;
  const int d = spec.dim;
  const double k = bare.decay_rate();
  const double area = sphere_area(d);

  struct Item {
    const char* name;
    bool derivative;
    int power;
    bool claimed;
  };
  const Item items[] = {
      {"Q_L1", false, 1, true},
      {"dQ_L1", true, 1, true},
      {"Q_L2sq", false, 2, d <= 3},
      {"dQ_L2sq", true, 2, d == 1},
  };

  std::vector<NormEntry> out;
  for (const auto& item : items) {
    auto f = [&](double v) {
      double r = std::exp(v);
      double g = item.derivative ? q_lambda_radial_derivative(bare, r) : q_lambda_radial(bare, r);
      double p = item.power == 1 ? std::abs(g) : g * g;
      return area * p * std::pow(r, d);
    };
    auto piece = [&](double a, double b) { return log_piece(f, a, b); };
    auto seq = refine_inner_cutoff(piece, (kExpCut + 50.0) / (item.power * k), 12);
    NormEntry e;
    e.name = item.name;
    e.dim = d;
    e.value = seq.values.back();
    e.claimed_finite = item.claimed;
    e.stable = seq.stable;
    e.divergent = seq.divergent;
    e.pass = item.claimed ? seq.stable : !seq.stable;
    e.refinement = seq.values;
    out.push_back(std::move(e));
  }
  return out;
}

EnvelopeFit fit_gaussian_envelope(const KernelSpec& spec) {
  spec.validate();
  // The envelope ratio depends on x and t only through y = |x| / sqrt(t).
  const double D = spec.diffusivity();
  EnvelopeFit fit;
  fit.a2 = 1.0 / (4.0 * spec.sigma0_sq);
  int argmax[3] = {0, 0, 0};
  const int n = 3000;
  for (int i = 0; i <= n; ++i) {
    double y = 0.01 * i;
    double q = heat_kernel_radial(spec.dim, spec.sigma0_sq, 1.0, y);
    double weight = std::exp(fit.a2 * y * y);
    double radial2 = std::abs(y * y / (4.0 * D * D) - 1.0 / (2.0 * D));
    double hess = spec.dim == 1 ? radial2 : std::max(radial2, 1.0 / (2.0 * D));
    double vals[3] = {q, y / (2.0 * D) * q, hess * q};
    for (int j = 0; j < 3; ++j) {
      if (vals[j] * weight > fit.a1[j]) {
        fit.a1[j] = vals[j] * weight;
        argmax[j] = i;
      }
    }
  }
  fit.valid = true;
  for (int j = 0; j < 3; ++j)
    fit.valid = fit.valid && std::isfinite(fit.a1[j]) && argmax[j] < n - 100;
  return fit;
}

}  // namespace sdsm
