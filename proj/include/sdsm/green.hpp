#ifndef SDSM_GREEN_HPP
#define SDSM_GREEN_HPP

#include <span>
#include <string>
#include <vector>

namespace sdsm {

/// Constant-coefficient kernel parameters: G_1 = (sigma0^2 / 2) Laplacian.
struct KernelSpec {
  double lambda = 1.0;     ///< resolvent parameter, 1/time
  double eps = 0.0;        ///< mollification time; 0 means the bare Q^lambda
  double sigma0_sq = 2.0;  ///< a + rho(0), assumed scalar times identity
  int dim = 1;

  double diffusivity() const { return 0.5 * sigma0_sq; }
  /// sqrt(2 lambda) / sigma0, the decay rate of Q^lambda.
  double decay_rate() const;
  void validate() const;
};

/// Modified Bessel functions of the second kind: power series for x <= 2,
/// trapezoidal rule on exp(-x cosh t) cosh(nu t) up to 30, asymptotic
/// expansion beyond.
double bessel_k0(double x);
double bessel_k1(double x);

/// (2 pi sigma0^2 t)^(-d/2) exp(-|x|^2 / (2 sigma0^2 t)).
double heat_kernel(const KernelSpec& spec, double t, std::span<const double> x);
double heat_kernel_radial(int dim, double sigma0_sq, double t, double r);

/// Radial profile of a kernel and its derivatives in r. `f1_over_r` is
/// f'(r)/r, finite at r = 0 for smooth profiles.
struct RadialJet {
  double f = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double f1_over_r = 0.0;
};

/// Which function of the heat kernel a Laplace integral transforms.
enum class HeatTerm {
  value,
  radial_derivative,
  radial_derivative_over_r,
  radial_second_derivative,
  laplacian
};

/// e^{lambda eps} \int_eps^inf e^{-lambda t} T[q_t](r) dt by composite
/// Gauss-Legendre in u = log t on [eps, 1] and [1, inf), doubling until the
/// relative change is below 1e-12. With eps = 0 this is Q^lambda (r > 0
/// required when d >= 2). Throws QuadratureError if it fails to settle.
double laplace_heat_integral(const KernelSpec& spec, double r, HeatTerm term);

/// Closed forms of Q^lambda for d = 1..4 (Bessel K0/K1 for d = 2, 4).
/// Throws DomainError at x = 0 when d >= 2.
double q_lambda(const KernelSpec& spec, std::span<const double> x);
double q_lambda_radial(const KernelSpec& spec, double r);
/// dQ^lambda/dr for r > 0.
double q_lambda_radial_derivative(const KernelSpec& spec, double r);

/// Q^lambda_eps = e^{lambda eps} \int_eps^inf e^{-lambda t} q_t dt, eps > 0.
///
/// d = 1 uses the erfc closed form (derivatives differentiated term by term,
/// without using the resolvent identity); other dimensions go through
/// laplace_heat_integral.
class ResolventKernel {
 public:
  explicit ResolventKernel(KernelSpec spec);

  const KernelSpec& spec() const { return spec_; }
  RadialJet profile(double r) const;
  double value(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;
  double laplacian(std::span<const double> x) const;

 private:
  RadialJet closed_form_1d(double r) const;
  KernelSpec spec_;
};

double q_lambda_eps(const KernelSpec& spec, std::span<const double> x);
std::vector<double> grad_q_lambda_eps(const KernelSpec& spec, std::span<const double> x);

/// d = 1 only: Q^lambda_eps as the spatial convolution Q^lambda * q_eps.
double q_lambda_eps_convolution_1d(const KernelSpec& spec, double x);

/// The mollifier q_eps(x) = heat kernel at time eps.
double mollifier(const KernelSpec& spec, std::span<const double> x);

/// max over the grid of |(lambda - G_1) Q^lambda_eps(x) - q_{eps * factor}(x)|.
/// factor = 1 is the identity; other factors give a deliberate mismatch.
double resolvent_identity_residual(const KernelSpec& spec,
                                   const std::vector<std::vector<double>>& grid,
                                   double mollifier_time_factor = 1.0);

/// Points x = (v, 0, ..., 0) for v in [lo, hi] with the given step.
std::vector<std::vector<double>> axis_grid(int dim, double lo, double hi, double step);

struct ChiBoundReport {
  int dim = 0;
  double t = 0.0;
  double lambda = 0.0;
  double chi = 0.0;
  double bound = 0.0;
  bool pass = false;
  bool divergent = false;
  /// Values with lower cutoff 10^-1, 10^-2, ... on the substituted variable.
  std::vector<double> refinement;
};

/// chi_d(t) = \int\int e^{-lambda(u+v)} (uv)^{-1/2} \int_0^t (2r+u+v)^{-d/2} dr du dv
/// with the inner integral in closed form and the outer one reduced to a
/// radial integral by u = w^2, v = z^2 and polar coordinates.
/// bound = (t + 1) pi sqrt(pi / lambda).
ChiBoundReport chi_bound_check(int dim, double t, double lambda);

struct NormEntry {
  std::string name;
  int dim = 0;
  double value = 0.0;
  bool claimed_finite = false;
  bool stable = false;  ///< refinement sequence settled to 1e-6 relative
  bool divergent = false;
  bool pass = false;    ///< stable when claimed finite, divergent otherwise
  std::vector<double> refinement;
};

/// ||Q||_1, ||dQ||_1, ||Q||_2^2 and ||dQ||_2^2 for the spec's dimension,
/// each as a refinement sequence over the inner radial cutoff.
std::vector<NormEntry> norm_report(const KernelSpec& spec);

/// Fitted constants of Gaussian envelopes |d^k q_t(x)| <= a1_k t^{-(d+k)/2}
/// exp(-a2 |x|^2 / t), k = 0, 1, 2, with a2 fixed at 1 / (4 sigma0^2).
struct EnvelopeFit {
  double a2 = 0.0;
  double a1[3] = {0.0, 0.0, 0.0};
  bool valid = false;
};
EnvelopeFit fit_gaussian_envelope(const KernelSpec& spec);

}  // namespace sdsm

#endif  // SDSM_GREEN_HPP
