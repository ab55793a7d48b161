#include "sdsm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "sdsm/errors.hpp"
#include "sdsm/quadrature.hpp"

namespace sdsm {

// ---------------------------------------------------------------- offspring

OffspringLaw::OffspringLaw(std::vector<double> probabilities)
    : p_(std::move(probabilities)) {
  if (p_.empty()) throw ModelError("offspring law: empty probability vector");
  double total = 0.0;
  for (std::size_t k = 0; k < p_.size(); ++k) {
    if (!(p_[k] >= 0.0) || !std::isfinite(p_[k]))
      throw ModelError("offspring law: p_" + std::to_string(k) + " is not a probability");
    total += p_[k];
    mean_ += static_cast<double>(k) * p_[k];
    second_moment_ += static_cast<double>(k * k) * p_[k];
    cdf_.push_back(total);
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw ModelError("offspring law: probabilities sum to " + std::to_string(total));
  cdf_.back() = 1.0;
}

OffspringLaw OffspringLaw::critical_binary() { return OffspringLaw({0.5, 0.0, 0.5}); }

void OffspringLaw::check_critical() const {
  if (p_.size() > 1 && p_[1] != 0.0)
    throw ModelError("offspring law: p_1 must be 0, got " + std::to_string(p_[1]));
  if (std::abs(mean_ - 1.0) > 1e-12)
    throw ModelError("offspring law: not critical, mean " + std::to_string(mean_));
  if (!(sigma2() > 0.0) || !std::isfinite(sigma2()))
    throw ModelError("offspring law: sigma^2 must be positive and finite");
}

int OffspringLaw::sample(RandomStream& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                   static_cast<std::ptrdiff_t>(p_.size()) - 1));
}

// ---------------------------------------------------------------- medium

double GaussianMedium::kernel(std::span<const double> z) const {
  double r2 = 0.0;
  for (double v : z) r2 += v * v;
  return std::exp(-r2 / (4.0 * scale * scale));
}

// ---------------------------------------------------------------- model

ModelCoefficients::ModelCoefficients(Parts parts) : parts_(std::move(parts)) {
  if (parts_.dim < 1) throw ModelError("model: dimension must be positive");
  if (!parts_.c || !parts_.h) throw ModelError("model: c and h must be set");
  if (!(parts_.gamma >= 0.0)) throw ModelError("model: gamma must be >= 0");
  if (!(parts_.h_decay_scale > 0.0)) throw ModelError("model: h decay scale must be > 0");
}

Eigen::MatrixXd ModelCoefficients::a(std::span<const double> x) const {
  if (parts_.constant_c) return *parts_.constant_c * parts_.constant_c->transpose();
  const Eigen::MatrixXd cx = parts_.c(x);
  return cx * cx.transpose();
}

ModelCoefficients ModelCoefficients::without_closed_form_rho() const {
  Parts copy = parts_;
  copy.rho_closed_form.reset();
  copy.gaussian_medium.reset();
  return ModelCoefficients(std::move(copy));
}

ModelCoefficients ModelCoefficients::with_gamma(double gamma) const {
  Parts copy = parts_;
  copy.gamma = gamma;
  return ModelCoefficients(std::move(copy));
}

ModelCoefficients ModelCoefficients::with_offspring(OffspringLaw law) const {
  Parts copy = parts_;
  copy.offspring = std::move(law);
  return ModelCoefficients(std::move(copy));
}

ModelCoefficients make_model(int dim, const ConstantC& c,
                             const std::variant<ZeroH, GaussianH>& h, double gamma,
                             OffspringLaw offspring) {
  if (c.matrix.rows() != dim || c.matrix.cols() != dim)
    throw ModelError("constant_c: matrix must be d x d");
  ModelCoefficients::Parts parts;
  parts.dim = dim;
  parts.gamma = gamma;
  parts.offspring = std::move(offspring);
  const Eigen::MatrixXd cm = c.matrix;
  parts.c = [cm](std::span<const double>) { return cm; };
  parts.constant_c = cm;
  std::ostringstream desc;
  desc << "constant_c";
  if (std::holds_alternative<ZeroH>(h)) {
    parts.h = [dim](std::span<const double>) { return Eigen::VectorXd::Zero(dim).eval(); };
    parts.rho_closed_form = [dim](std::span<const double>) {
      return Eigen::MatrixXd::Zero(dim, dim).eval();
    };
    parts.zero_medium = true;
    desc << " + zero_h";
  } else {
    const auto& g = std::get<GaussianH>(h);
    std::vector<double> amp = g.amplitude;
    if (amp.size() == 1 && dim > 1) amp.assign(dim, amp[0]);
    if (static_cast<int>(amp.size()) != dim)
      throw ModelError("gaussian_h: amplitude must have d entries");
    if (!(g.scale > 0.0)) throw ModelError("gaussian_h: scale must be positive");
    const double s = g.scale;
    const double norm = std::pow(std::numbers::pi * s * s, -0.25 * dim);
    const Eigen::Map<const Eigen::VectorXd> a(amp.data(), dim);
    const Eigen::VectorXd avec = a;
    parts.h = [avec, s, norm](std::span<const double> u) {
      double r2 = 0.0;
      for (double v : u) r2 += v * v;
      return (avec * (norm * std::exp(-r2 / (2.0 * s * s)))).eval();
    };
    GaussianMedium medium{amp, s};
    parts.rho_closed_form = [avec, medium](std::span<const double> z) {
      return (medium.kernel(z) * avec * avec.transpose()).eval();
    };
    parts.gaussian_medium = medium;
    parts.h_decay_scale = s;
    if (std::all_of(amp.begin(), amp.end(), [](double v) { return v == 0.0; }))
      parts.zero_medium = true;
    desc << " + gaussian_h(scale=" << s << ")";
  }
  parts.description = desc.str();
  return ModelCoefficients(std::move(parts));
}

ModelCoefficients reference_model() {
  return make_model(1, ConstantC{Eigen::MatrixXd::Ones(1, 1)},
                    GaussianH{{1.0}, std::numbers::sqrt2}, 1.0,
                    OffspringLaw::critical_binary());
}

// ---------------------------------------------------------------- rho

namespace {

int max_panels_for(int dim) {
  switch (dim) {
    case 1: return 256;
    case 2: return 32;
    default: return 8;
  }
}

Eigen::MatrixXd rho_box(const ModelCoefficients& model, std::span<const double> z,
                        int panels) {
  const int d = model.dim();
  const double tail = 8.0 * model.h_decay_scale();
  std::vector<double> lo(d), hi(d);
  for (int k = 0; k < d; ++k) {
    const double centre = -0.5 * z[k];
    const double half = 0.5 * std::abs(z[k]) + tail;
    lo[k] = centre - half;
    hi[k] = centre + half;
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> shifted(d);
  // One pass accumulates every (p, q) entry.
  for (int p = 0; p < d; ++p) {
    for (int q = 0; q < d; ++q) {
      out(p, q) = quad::integrate_box(
          [&](const double* u) {
            for (int k = 0; k < d; ++k) shifted[k] = u[k] + z[k];
            const Eigen::VectorXd hu = model.h({u, static_cast<std::size_t>(d)});
            const Eigen::VectorXd hz = model.h(shifted);
            return hu(p) * hz(q);
          },
          lo, hi, panels);
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd rho_quadrature(const ModelCoefficients& model,
                               std::span<const double> z) {
  const int cap = max_panels_for(model.dim());
  Eigen::MatrixXd previous = rho_box(model, z, 2);
  double change = 0.0;
  for (int panels = 4; panels <= cap; panels *= 2) {
    Eigen::MatrixXd current = rho_box(model, z, panels);
    change = (current - previous).cwiseAbs().maxCoeff();
    if (change <= 1e-13 * std::max(1.0, current.cwiseAbs().maxCoeff())) return current;
    previous = std::move(current);
  }
  if (change > 1e-7)
    throw QuadratureError("rho quadrature did not converge: last refinement changed by " +
                          std::to_string(change));
  return previous;
}

Eigen::MatrixXd rho(const ModelCoefficients& model, std::span<const double> z) {
  if (model.parts().rho_closed_form) return (*model.parts().rho_closed_form)(z);
  return rho_quadrature(model, z);
}

// ---------------------------------------------------------------- Gamma

GammaMatrix assemble_gamma(const ModelCoefficients& model,
                           std::span<const double> positions) {
  const int d = model.dim();
  if (positions.size() % d != 0 || positions.empty())
    throw std::invalid_argument("assemble_gamma: need m >= 1 positions of dimension d");
  const int m = static_cast<int>(positions.size()) / d;
  GammaMatrix g{m, d, Eigen::MatrixXd::Zero(m * d, m * d)};
  std::vector<double> zero(d, 0.0);
  const Eigen::MatrixXd rho0 = rho(model, zero);
  std::vector<double> diff(d);
  for (int i = 0; i < m; ++i) {
    const auto xi = positions.subspan(i * d, d);
    g.matrix.block(i * d, i * d, d, d) = model.a(xi) + rho0;
    for (int j = i + 1; j < m; ++j) {
      for (int k = 0; k < d; ++k) diff[k] = positions[i * d + k] - positions[j * d + k];
      const Eigen::MatrixXd r = rho(model, diff);
      g.matrix.block(i * d, j * d, d, d) = r;
      g.matrix.block(j * d, i * d, d, d) = r.transpose();
    }
  }
  return g;
}

EllipticityBounds check_ellipticity(const ModelCoefficients& model,
                                    std::span<const double> positions) {
  const GammaMatrix g = assemble_gamma(model, positions);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.matrix, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  EllipticityBounds bounds{ev.minCoeff(), ev.maxCoeff()};
  if (bounds.lambda_min <= kEllipticityFloor) {
    std::ostringstream msg;
    msg << "Gamma is not uniformly elliptic at a " << g.particles
        << "-particle configuration: lambda_min = " << bounds.lambda_min;
    throw EllipticityViolation(msg.str(), {positions.begin(), positions.end()},
                               bounds.lambda_min);
  }
  return bounds;
}

double quadratic_form_by_parts(const ModelCoefficients& model,
                               std::span<const double> positions,
                               std::span<const double> xi) {
  const int d = model.dim();
  const int m = static_cast<int>(positions.size()) / d;
  double individual = 0.0;
  for (int i = 0; i < m; ++i) {
    const Eigen::MatrixXd ci = model.c(positions.subspan(i * d, d));
    const Eigen::Map<const Eigen::VectorXd> xii(xi.data() + i * d, d);
    individual += (ci.transpose() * xii).squaredNorm();
  }
  // Box covering every translated h.
  const double tail = 8.0 * model.h_decay_scale();
  std::vector<double> lo(d, 1e300), hi(d, -1e300);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < d; ++k) {
      lo[k] = std::min(lo[k], positions[i * d + k] - tail);
      hi[k] = std::max(hi[k], positions[i * d + k] + tail);
    }
  std::vector<double> shifted(d);
  const auto medium_at = [&](int panels) {
    return quad::integrate_box(
        [&](const double* u) {
          double s = 0.0;
          for (int i = 0; i < m; ++i) {
            for (int k = 0; k < d; ++k) shifted[k] = u[k] - positions[i * d + k];
            s += model.h(shifted).dot(Eigen::Map<const Eigen::VectorXd>(xi.data() + i * d, d));
          }
          return s * s;
        },
        lo, hi, panels);
  };
  const int panels = d == 1 ? 64 : (d == 2 ? 16 : 6);
  return individual + medium_at(panels);
}

// ---------------------------------------------------------------- validation

ModelValidationReport validate_model(const ModelCoefficients& model, std::uint64_t seed) {
  ModelValidationReport report;
  model.offspring().check_critical();
  const int d = model.dim();
  RandomStream rng(seed, 0);

  // h_p integrable: box integral of |h_p| stable when the box grows by 50%.
  const double box = 8.0 * model.h_decay_scale();
  for (int p = 0; p < d; ++p) {
    const auto l1 = [&](double half) {
      std::vector<double> lo(d, -half), hi(d, half);
      return quad::integrate_box(
          [&](const double* u) {
            return std::abs(model.h({u, static_cast<std::size_t>(d)})(p));
          },
          lo, hi, d == 1 ? 64 : (d == 2 ? 16 : 6));
    };
    const double inner = l1(box);
    const double outer = l1(1.5 * box);
    if (!std::isfinite(inner) || std::abs(outer - inner) > 1e-8 * std::max(1.0, outer))
      throw ModelError("h_" + std::to_string(p + 1) +
                       " is not integrable on the truncation box");
    report.h_l1_norms.push_back(outer);
  }

  // a(x) symmetric PSD at sampled points.
  report.min_a_eigenvalue = 1e300;
  std::vector<double> x(d);
  for (int s = 0; s < 16; ++s) {
    for (auto& v : x) v = -5.0 + 10.0 * rng.uniform();
    const Eigen::MatrixXd ax = model.a(x);
    if ((ax - ax.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ModelError("a(x) is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ax, Eigen::EigenvaluesOnly);
    report.min_a_eigenvalue = std::min(report.min_a_eigenvalue, es.eigenvalues().minCoeff());
    if (es.eigenvalues().minCoeff() < -1e-10) throw ModelError("a(x) is not PSD");
  }

  // Closed-form rho against quadrature.
  if (model.has_rho_closed_form()) {
    const ModelCoefficients quad_model = model.without_closed_form_rho();
    const int samples = d == 3 ? 2 : 4;
    for (int s = 0; s < samples; ++s) {
      for (auto& v : x) v = (s == 0) ? 0.0 : -3.0 + 6.0 * rng.uniform();
      const Eigen::MatrixXd closed = rho(model, x);
      const Eigen::MatrixXd numeric = rho_quadrature(quad_model, x);
      const double err = (closed - numeric).cwiseAbs().maxCoeff();
      report.max_rho_closed_form_error = std::max(report.max_rho_closed_form_error, err);
      if (err > 1e-7 * std::max(1.0, numeric.cwiseAbs().maxCoeff()))
        throw ModelError("closed-form rho disagrees with quadrature by " + std::to_string(err));
    }
  }

  // Ellipticity on random configurations.
  report.min_gamma_eigenvalue = 1e300;
  for (int s = 0; s < 4; ++s) {
    std::vector<double> pos(5 * d);
    for (auto& v : pos) v = -3.0 + 6.0 * rng.uniform();
    const auto b = check_ellipticity(model, pos);
    report.min_gamma_eigenvalue = std::min(report.min_gamma_eigenvalue, b.lambda_min);
  }
  return report;
}

std::optional<double> constant_effective_diffusion(const ModelCoefficients& model) {
  if (!model.constant_c()) return std::nullopt;
  const int d = model.dim();
  std::vector<double> zero(d, 0.0);
  const Eigen::MatrixXd total = model.a(zero) + rho(model, zero);
  const double s = total(0, 0);
  const Eigen::MatrixXd off = total - s * Eigen::MatrixXd::Identity(d, d);
  if (off.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, std::abs(s))) return std::nullopt;
  return s;
}

}  // namespace sdsm
