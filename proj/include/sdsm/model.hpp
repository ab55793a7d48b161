#ifndef SDSM_MODEL_HPP
#define SDSM_MODEL_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sdsm/rng.hpp"

namespace sdsm {

/// Offspring distribution p_k, k = 0..K.
///
/// Construction only checks that the p_k form a probability vector, so
/// diagnostic laws (pure death, supercritical) can still be simulated;
/// `check_critical()` enforces p_1 = 0, mean 1 and 0 < sigma^2 < inf.
class OffspringLaw {
 public:
  explicit OffspringLaw(std::vector<double> probabilities);

  /// p_0 = p_2 = 1/2, so sigma^2 = 1.
  static OffspringLaw critical_binary();

  const std::vector<double>& probabilities() const { return p_; }
  double mean() const { return mean_; }
  double second_moment() const { return second_moment_; }
  /// sigma^2 = sum k^2 p_k - 1.
  double sigma2() const { return second_moment_ - 1.0; }

  void check_critical() const;
  int sample(RandomStream& rng) const;

 private:
  std::vector<double> p_;
  std::vector<double> cdf_;
  double mean_ = 0.0;
  double second_moment_ = 0.0;
};

/// h_p(u) = a_p (pi s^2)^(-d/4) exp(-|u|^2 / (2 s^2)), which gives the
/// closed form rho_pq(z) = a_p a_q exp(-|z|^2 / (4 s^2)).
struct GaussianMedium {
  std::vector<double> amplitude;
  double scale = 1.0;

  double kernel(std::span<const double> z) const;
};

/// One SDSM instance: dimension, individual diffusion c, medium intensity h,
/// branching rate gamma and offspring law. Immutable once built; share it
/// freely across replicates.
class ModelCoefficients {
 public:
  using MatrixField = std::function<Eigen::MatrixXd(std::span<const double>)>;
  using VectorField = std::function<Eigen::VectorXd(std::span<const double>)>;

  struct Parts {
    int dim = 1;
    MatrixField c;
    VectorField h;
    /// Length scale of h's decay; sets the quadrature truncation box.
    double h_decay_scale = 1.0;
    double gamma = 1.0;
    OffspringLaw offspring = OffspringLaw::critical_binary();
    std::optional<MatrixField> rho_closed_form;
    std::optional<Eigen::MatrixXd> constant_c;
    std::optional<GaussianMedium> gaussian_medium;
    bool zero_medium = false;
    std::string description;
  };

  explicit ModelCoefficients(Parts parts);

  int dim() const { return parts_.dim; }
  double gamma() const { return parts_.gamma; }
  const OffspringLaw& offspring() const { return parts_.offspring; }
  double h_decay_scale() const { return parts_.h_decay_scale; }
  const std::string& description() const { return parts_.description; }

  Eigen::MatrixXd c(std::span<const double> x) const { return parts_.c(x); }
  Eigen::VectorXd h(std::span<const double> u) const { return parts_.h(u); }
  /// a(x) = c(x) c(x)^T.
  Eigen::MatrixXd a(std::span<const double> x) const;

  bool has_rho_closed_form() const { return parts_.rho_closed_form.has_value(); }
  const std::optional<Eigen::MatrixXd>& constant_c() const { return parts_.constant_c; }
  const std::optional<GaussianMedium>& gaussian_medium() const {
    return parts_.gaussian_medium;
  }
  bool zero_medium() const { return parts_.zero_medium; }

  /// Copy with the closed-form rho removed (forces quadrature).
  ModelCoefficients without_closed_form_rho() const;
  ModelCoefficients with_gamma(double gamma) const;
  ModelCoefficients with_offspring(OffspringLaw law) const;

  const Parts& parts() const { return parts_; }

 private:
  Parts parts_;
};

struct ConstantC {
  Eigen::MatrixXd matrix;
};
struct ZeroH {};
struct GaussianH {
  std::vector<double> amplitude;
  double scale = 1.0;
};

ModelCoefficients make_model(int dim, const ConstantC& c,
                             const std::variant<ZeroH, GaussianH>& h, double gamma,
                             OffspringLaw offspring);

/// d = 1, c = 1, h(u) = (2 pi)^(-1/4) exp(-u^2/4), gamma = 1, critical binary
/// branching. rho(z) = exp(-z^2/8) and a + rho(0) = 2.
ModelCoefficients reference_model();

/// rho(z) for the model: closed form when present, quadrature otherwise.
Eigen::MatrixXd rho(const ModelCoefficients& model, std::span<const double> z);

/// rho_pq(z) = \int h_p(u) h_q(u + z) du by tensor Gauss-Legendre on a box
/// sized from the decay scale. Throws QuadratureError if two refinements
/// differ by more than 1e-7 in max norm.
Eigen::MatrixXd rho_quadrature(const ModelCoefficients& model,
                               std::span<const double> z);

/// Dense dm x dm diffusion matrix with blocks a(x_i) + rho(0) on the
/// diagonal and rho(x_i - x_j) off it. Index (i, p) maps to i*d + p.
struct GammaMatrix {
  int particles = 0;
  int dim = 0;
  Eigen::MatrixXd matrix;

  double block(int i, int j, int p, int q) const {
    return matrix(i * dim + p, j * dim + q);
  }
};

GammaMatrix assemble_gamma(const ModelCoefficients& model,
                           std::span<const double> positions);

struct EllipticityBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

/// Eigenvalues at or below this are treated as an ellipticity violation.
inline constexpr double kEllipticityFloor = 1e-10;

/// Extreme eigenvalues of Gamma; throws EllipticityViolation when
/// lambda_min <= kEllipticityFloor.
EllipticityBounds check_ellipticity(const ModelCoefficients& model,
                                    std::span<const double> positions);

/// xi^T Gamma xi computed as the sum of individual and medium parts:
/// sum_i |c(x_i)^T xi_i|^2 + \int |sum_i sum_p xi_ip h_p(u - x_i)|^2 du.
/// The integral is done by quadrature, independently of rho.
double quadratic_form_by_parts(const ModelCoefficients& model,
                               std::span<const double> positions,
                               std::span<const double> xi);

struct ModelValidationReport {
  std::vector<double> h_l1_norms;
  double max_rho_closed_form_error = 0.0;
  double min_a_eigenvalue = 0.0;
  double min_gamma_eigenvalue = 0.0;
};

/// Runtime checks of the model hypotheses: critical offspring law, h_p
/// integrable (box integral stable under enlargement), a(x) PSD at sampled
/// points, closed-form rho consistent with quadrature, Gamma elliptic on
/// random configurations. Throws ModelError on the first failure.
ModelValidationReport validate_model(const ModelCoefficients& model,
                                     std::uint64_t seed = 0x5eed);

/// sigma_0^2 when a(x) + rho(0) is a constant multiple of the identity.
std::optional<double> constant_effective_diffusion(const ModelCoefficients& model);

}  // namespace sdsm

#endif  // SDSM_MODEL_HPP
