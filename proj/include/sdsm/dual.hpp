#ifndef SDSM_DUAL_HPP
#define SDSM_DUAL_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdsm/model.hpp"
#include "sdsm/particles.hpp"
#include "sdsm/rng.hpp"
#include "sdsm/test_function.hpp"

namespace sdsm {

/// One trajectory of the level process J on [0, t].
struct DualRun {
  int m = 1;
  double t = 0.0;
  std::vector<double> jump_times;
  /// Level right after each jump.
  std::vector<int> levels;
  /// Ordered pair (i, j), i != j, 0-based in {0..l-1} at the pre-jump level l.
  std::vector<std::pair<int, int>> pairs;
  /// Time spent at level l, indexed by l (entries 0 and 1 included).
  std::vector<double> sojourn;
  double gamma_sigma2 = 0.0;
  double log_weight = 0.0;

  int final_level() const { return levels.empty() ? m : levels.back(); }
  double weight() const;
};

/// Waiting time at level l is Exponential(gamma sigma^2 l (l-1) / 2); J stops
/// at 1. Throws std::invalid_argument for m < 1 or t < 0.
DualRun sample_jump_chain(int m, double t, double gamma_sigma2, RandomStream& rng);

/// exp((gamma sigma^2 / 2) sum_l l (l-1) s_l) from the sojourn table.
double dual_weight(const DualRun& run);

/// Symmetric function of m points given as a flat m*d array.
using MultiFunction = std::function<double(std::span<const double>)>;

/// f(x_1, ..., x_m) = prod_k phi(x_k).
MultiFunction tensor_power(const TestFunction& phi, int m);

struct DualMomentConfig {
  int m = 1;
  double t = 0.5;
  double dt = 1e-2;  ///< Euler step for the diffusion segments
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  int workers = 0;
};

struct DualMomentResult {
  double estimate = 0.0;
  double se = 0.0;
  std::size_t reps = 0;
  std::size_t rejected = 0;
  double rejected_fraction() const { return reps ? double(rejected) / reps : 0.0; }
};

/// Monte Carlo estimate of E <f, mu_t^m> by forward duplication: draw J_t
/// points from mu_0 / |mu_0|, diffuse them over t - tau_k, duplicate one
/// coordinate at each jump going back to tau_1, diffuse each segment, and
/// evaluate f on the m terminal points, weighting by
/// weight * |mu_0|^{J_t}. Replicate r uses RandomStream(seed, r).
DualMomentResult dual_moment(const MultiFunction& f, const InitialMeasure& mu0,
                             const ModelCoefficients& model, const DualMomentConfig& config);

/// One replicate of the estimator (exposed for tests).
double dual_replicate(const MultiFunction& f, const InitialMeasure& mu0,
                      const ModelCoefficients& model, int m, double t, double dt,
                      RandomStream rng);

struct MomentEstimate {
  std::string config_id;
  std::string observable;
  int m = 1;
  double value = 0.0;
  double se = 0.0;
};

struct CrossCheckEntry {
  std::string observable;
  int m = 1;
  double particle = 0.0, particle_se = 0.0;
  double dual = 0.0, dual_se = 0.0;
  double z = 0.0;
  bool flagged = false;
};

/// Two-sample z-scores between matching (observable, m) entries; flags
/// |z| > 3. Throws ConfigError when configuration ids differ or an entry has
/// no partner.
std::vector<CrossCheckEntry> cross_check(const std::vector<MomentEstimate>& particle,
                                         const std::vector<MomentEstimate>& dual);

}  // namespace sdsm

#endif  // SDSM_DUAL_HPP
