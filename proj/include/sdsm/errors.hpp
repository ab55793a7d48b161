#ifndef SDSM_ERRORS_HPP
#define SDSM_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace sdsm {

/// Invalid model coefficients or offspring law.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration (step-size cap, missing fields, bad manifests).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A quadrature routine failed to settle under refinement.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The m-particle diffusion matrix is not uniformly elliptic at a
/// configuration. Carries the offending positions (flattened, m*d).
class EllipticityViolation : public ModelError {
 public:
  EllipticityViolation(const std::string& what, std::vector<double> positions,
                       double lambda_min)
      : ModelError(what),
        positions_(std::move(positions)),
        lambda_min_(lambda_min) {}

  const std::vector<double>& positions() const { return positions_; }
  double lambda_min() const { return lambda_min_; }

 private:
  std::vector<double> positions_;
  double lambda_min_;
};

/// A kernel was asked for a value at a singular point.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace sdsm

#endif  // SDSM_ERRORS_HPP
