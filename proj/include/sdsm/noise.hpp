#ifndef SDSM_NOISE_HPP
#define SDSM_NOISE_HPP

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sdsm/model.hpp"
#include "sdsm/rng.hpp"
#include "sdsm/test_function.hpp"

namespace sdsm {

/// Joint displacement of m particles over one Euler step, split into the
/// individual part c(x_k) dB_k and the common-medium part. Both are flat
/// m*d arrays indexed like the positions.
struct StepIncrement {
  int dim = 1;
  std::vector<double> individual;
  std::vector<double> common;

  std::size_t particles() const { return dim > 0 ? individual.size() / dim : 0; }
  double total(std::size_t k, int p) const { return individual[k * dim + p] + common[k * dim + p]; }
};

/// Low-rank factor L (n x rank, column-major) with L L^T approximating a PSD
/// matrix to within `tol` on the residual diagonal.
struct LowRankFactor {
  int rows = 0;
  int rank = 0;
  std::vector<double> L;

  double operator()(int i, int k) const { return L[static_cast<std::size_t>(k) * rows + i]; }
};

/// Pivoted Cholesky of a PSD matrix given by its diagonal and columns.
/// Stops when the largest residual diagonal is at most tol. Residual diagonal
/// entries in [-tol, 0) are clamped to 0; anything more negative is a
/// ModelError. Ties in the pivot choice go to the smallest index.
LowRankFactor pivoted_cholesky(int n, const std::function<double(int)>& diagonal,
                               const std::function<void(int, std::vector<double>&)>& column,
                               double tol = 1e-10);

/// Samples StepIncrements for one model.
///
/// Particles are processed in lexicographic order of position, so the draw
/// attached to a particle depends on where it is, not on its label. For
/// Gaussian media the common part is a_p xi_k with xi ~ N(0, K dt),
/// K_kl = exp(-|x_k - x_l|^2 / (4 s^2)); otherwise the full dm x dm matrix of
/// rho blocks is factored.
class NoiseSampler {
 public:
  explicit NoiseSampler(const ModelCoefficients& model, double tol = 1e-10);

  StepIncrement sample(std::span<const double> positions, double dt, RandomStream& rng) const;
  /// Rank used by the most recent factorization on this thread's last call.
  int last_rank() const { return last_rank_; }

 private:
  const ModelCoefficients* model_;
  double tol_;
  mutable int last_rank_ = 0;
};

/// One-shot convenience wrapper around NoiseSampler.
StepIncrement sample_step(const ModelCoefficients& model, std::span<const double> positions,
                          double dt, RandomStream& rng);

/// mass * sum_k grad phi(x_k) . common_k, the Euler increment of X(phi).
double common_martingale_increment(const StepIncrement& increment, const TestFunction& phi,
                                   std::span<const double> positions, double mass);

/// Lexicographic order of the m points (stable for ties).
std::vector<int> canonical_order(std::span<const double> positions, int dim);

}  // namespace sdsm

#endif  // SDSM_NOISE_HPP
