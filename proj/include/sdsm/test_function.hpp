#ifndef SDSM_TEST_FUNCTION_HPP
#define SDSM_TEST_FUNCTION_HPP

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sdsm/green.hpp"

namespace sdsm {

inline constexpr int kMaxDim = 4;

/// Value, gradient and Hessian at one point. The Hessian is stored row-major
/// with stride kMaxDim, so entry (p, q) is hess[p * kMaxDim + q].
struct Jet {
  double value = 0.0;
  std::array<double, kMaxDim> grad{};
  std::array<double, kMaxDim * kMaxDim> hess{};

  double hessian(int p, int q) const { return hess[p * kMaxDim + q]; }
};

/// Observable phi with analytic derivatives.
///
/// Every family except `constant` and `linear` is radial about a center:
/// phi(x) = f(|x - center|), with f supplied as a RadialJet profile.
class TestFunction {
 public:
  enum class Family {
    constant,
    linear,
    gaussian_bump,
    compact_bump,
    weighted_polynomial,
    resolvent_kernel,
    heat_mollifier,
  };

  static TestFunction constant(int dim, double c = 1.0);
  /// phi(x) = b . x
  static TestFunction linear(std::vector<double> coefficients);
  /// A exp(-|x - c|^2 / (2 s^2))
  static TestFunction gaussian_bump(std::vector<double> center, double width,
                                    double amplitude = 1.0);
  /// A exp(1 - 1 / (1 - |x - c|^2 / R^2)) inside the ball of radius R, 0 outside.
  static TestFunction compact_bump(std::vector<double> center, double radius,
                                   double amplitude = 1.0);
  /// (c0 + c2 |x|^2) I_a(x) with I_a(x) = (1 + |x|^2)^(-a/2).
  static TestFunction weighted_polynomial(int dim, double a, double c0, double c2);
  /// psi(z) = Q^lambda_eps(x - z) for the evaluation point x = center.
  static TestFunction resolvent_kernel(std::vector<double> center, const KernelSpec& spec);
  /// q_eps(x - z), the heat kernel at time eps.
  static TestFunction heat_mollifier(std::vector<double> center, const KernelSpec& spec);

  Family family() const { return family_; }
  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  TestFunction& set_name(std::string name) {
    name_ = std::move(name);
    return *this;
  }
  const std::vector<double>& center() const { return center_; }
  /// Radius of the support about the center; infinity when not compact.
  double support_radius() const { return support_radius_; }
  /// Family parameters in declaration order, for manifests.
  const std::vector<double>& parameters() const { return parameters_; }

  double value(std::span<const double> x) const;
  Jet jet(std::span<const double> x) const;

 private:
  TestFunction(Family family, int dim, std::string name);

  Family family_;
  int dim_;
  std::string name_;
  std::vector<double> center_;
  std::vector<double> coefficients_;
  double constant_ = 0.0;
  double support_radius_ = std::numeric_limits<double>::infinity();
  std::vector<double> parameters_;
  std::function<RadialJet(double)> profile_;
  std::function<double(double)> profile_value_;
};

std::string family_name(TestFunction::Family family);

}  // namespace sdsm

#endif  // SDSM_TEST_FUNCTION_HPP
