#ifndef SDSM_LOCALTIME_HPP
#define SDSM_LOCALTIME_HPP

#include <span>
#include <vector>

#include "sdsm/green.hpp"
#include "sdsm/model.hpp"
#include "sdsm/particles.hpp"
#include "sdsm/test_function.hpp"

namespace sdsm {

/// Lambda^{x,eps}_t with both of its evaluations and, when computed, the
/// Tanaka right-hand side term by term.
struct LocalTimeEstimate {
  std::vector<double> x;
  double t = 0.0;
  double eps = 0.0;
  double lambda = 0.0;
  /// Trapezoidal int_0^t <q_eps(x - .), mu_s> ds.
  double value = 0.0;
  /// Trapezoidal int_0^t <(lambda - G_1) Q^lambda_eps(x - .), mu_s> ds; NaN
  /// when neither snapshots nor a tracked psi observable are available.
  double resolvent_form = 0.0;
  double form_difference = 0.0;

  double initial_mass = 0.0;     ///< <psi, mu_0>
  double terminal_mass = 0.0;    ///< <psi, mu_t>
  double lambda_integral = 0.0;  ///< lambda int_0^t <psi, mu_s> ds
  double common_noise = 0.0;     ///< X_t(psi)
  double branching = 0.0;        ///< M_t(psi)
  double individual_noise = 0.0; ///< U_t(psi), nonzero at finite n
  double discrete_qv = 0.0;      ///< Qd_t(psi), Euler second-order term
  double rhs = 0.0;
};

struct TanakaOptions {
  bool include_branching = true;
  bool include_individual = true;
  bool include_discrete_qv = true;
};

/// Name under which the simulation should register psi = Q^lambda_eps(x - .).
TestFunction tanaka_observable(std::vector<double> x, const KernelSpec& spec);
/// Name under which the simulation should register q_eps(x - .).
TestFunction mollifier_observable(std::vector<double> x, const KernelSpec& spec);

/// Local time at the end of the record. The q_eps form comes from a
/// registered mollifier observable or, failing that, from full snapshots.
/// Throws DomainError for d >= 4, ConfigError when neither source exists or
/// the model's effective diffusion is not a constant scalar.
LocalTimeEstimate local_time(const PathRecord& record, const ModelCoefficients& model,
                             std::span<const double> x, double eps, double lambda);

/// Running values of the q_eps form at every recorded step.
std::vector<double> local_time_series(const PathRecord& record, const ModelCoefficients& model,
                                      std::span<const double> x, double eps);

/// <psi, mu_0> - <psi, mu_t> + lambda int <psi, mu_s> ds + X_t(psi) + M_t(psi)
/// (+ U_t + Qd_t per options), with psi registered before the run.
LocalTimeEstimate tanaka_rhs(const PathRecord& record, const ModelCoefficients& model,
                             std::span<const double> x, double eps, double lambda,
                             const TanakaOptions& options = {});

/// |value - rhs|.
double tanaka_residual(const PathRecord& record, const ModelCoefficients& model,
                       std::span<const double> x, double eps, double lambda,
                       const TanakaOptions& options = {});

struct OccupationReport {
  std::vector<double> eps;
  std::vector<double> smoothed;  ///< int phi(x) Lambda^{x,eps}_t dx
  std::vector<double> gap;       ///< smoothed - occupation
  std::vector<double> orders;    ///< log |gap_i / gap_{i+1}| / log(eps_i / eps_{i+1})
  double occupation = 0.0;       ///< int_0^t <phi, mu_s> ds
  bool monotone = false;         ///< |gap| strictly decreasing along eps
  bool kernel_mass_ok = false;
};

/// Compares int phi Lambda^{x,eps} dx (Gauss-Legendre over the support box of
/// phi) with the occupation integral. Requires full snapshots and a compactly
/// supported phi. Throws ConfigError when the grid cannot resolve q_eps.
OccupationReport occupation_consistency(const PathRecord& record, const ModelCoefficients& model,
                                        const TestFunction& phi, const std::vector<double>& eps,
                                        int panels_per_axis = 16);

struct Extrapolation {
  std::vector<double> eps;
  std::vector<double> values;
  double limit = 0.0;
  double error = 0.0;  ///< change between the last two linear extrapolations
};

/// Richardson-type extrapolation of Lambda^{x,eps} to eps = 0, assuming an
/// error linear in eps. Reported as an estimate, never as the exact limit.
Extrapolation extrapolate_local_time(const PathRecord& record, const ModelCoefficients& model,
                                     std::span<const double> x, const std::vector<double>& eps);

}  // namespace sdsm

#endif  // SDSM_LOCALTIME_HPP
