#ifndef SDSM_PARTICLES_HPP
#define SDSM_PARTICLES_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdsm/model.hpp"
#include "sdsm/noise.hpp"
#include "sdsm/rng.hpp"
#include "sdsm/test_function.hpp"

namespace sdsm {

/// Finite initial measure mu_0: weighted point masses, an isotropic Gaussian
/// density or a uniform density on a box, each with a total mass.
class InitialMeasure {
 public:
  enum class Kind { point_masses, gaussian, uniform_box };

  static InitialMeasure point_mass(std::vector<double> x, double mass = 1.0);
  /// Flat m*d point list with one weight per point.
  static InitialMeasure point_masses(int dim, std::vector<double> points,
                                     std::vector<double> weights);
  static InitialMeasure gaussian(std::vector<double> mean, double sd, double mass);
  static InitialMeasure uniform_box(std::vector<double> lo, std::vector<double> hi, double mass);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double total_mass() const { return mass_; }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  double sd() const { return sd_; }

  /// One draw from mu_0 / |mu_0| written to out[0..d).
  void sample(RandomStream& rng, double* out) const;

 private:
  Kind kind_ = Kind::point_masses;
  int dim_ = 1;
  double mass_ = 0.0;
  std::vector<double> points_, weights_, cdf_;
  std::vector<double> lo_, hi_;
  double sd_ = 1.0;
};

/// Alive particles of mu^(n)_t, each with mass 1 / theta^n.
struct ParticleCloud {
  int dim = 1;
  std::vector<double> positions;  ///< flat, particle k at [k*dim, (k+1)*dim)
  double theta = 2.0;
  int n = 0;
  double mass = 1.0;
  double time = 0.0;
  /// Multi-index labels such as "3⊕1⊕2"; empty unless lineage is enabled.
  std::vector<std::string> lineage;

  std::size_t size() const { return positions.size() / dim; }
  double total_mass() const { return mass * size(); }
  std::span<const double> position(std::size_t k) const {
    return std::span<const double>(positions).subspan(k * dim, dim);
  }
};

/// round(|mu_0| theta^n) i.i.d. draws from the normalized mu_0.
ParticleCloud init_cloud(const InitialMeasure& mu0, double theta, int n, RandomStream& rng,
                         bool lineage = false);

enum class BranchingMode {
  /// Each particle branches in a step with probability 1 - exp(-gamma theta^n dt);
  /// requires gamma theta^n dt <= 0.1.
  bernoulli,
  /// Exact next-event sampling of the branching clocks within each step, at
  /// the end-of-step positions. No cap on gamma theta^n dt.
  exact_events,
};

struct SimulationConfig {
  double horizon = 1.0;
  double dt = 1e-3;
  double theta = 2.0;
  int n = 6;
  std::uint64_t seed = 0;
  /// Stream id of this path; ensembles use one id per replicate.
  std::uint64_t replicate = 0;
  /// Store positions every k-th step (always including t = 0); 0 stores none.
  int snapshot_stride = 0;
  BranchingMode branching = BranchingMode::bernoulli;
  /// Accumulate X, U, M, Qd and the G_1 / phi^2 integrals. Values and the
  /// occupation integral are recorded either way.
  bool track_martingales = true;
  bool log_events = false;
  bool lineage = false;
  /// Skip the ellipticity gate (frozen or otherwise degenerate diagnostics).
  bool allow_degenerate = false;

  double theta_n() const;
  int steps() const;
  /// Throws ConfigError for non-positive dt, a horizon that is not a whole
  /// number of steps, or gamma theta^n dt > 0.1 in Bernoulli mode.
  void validate(const ModelCoefficients& model) const;
};

/// Per-step series of one observable. Index k refers to time k * dt.
struct ObservableSeries {
  std::string name;
  std::vector<double> value;         ///< <phi, mu_t>
  std::vector<double> generator;     ///< <G_1 phi, mu_t>
  std::vector<double> X;             ///< common-noise martingale
  std::vector<double> U;             ///< individual-noise martingale
  std::vector<double> M;             ///< branching martingale
  std::vector<double> Qd;            ///< discrete second-order term, mean zero
  std::vector<double> generator_integral;  ///< left Riemann sum of <G_1 phi, mu_s>
  std::vector<double> square_integral;     ///< left Riemann sum of <phi^2, mu_s>
  std::vector<double> occupation;          ///< trapezoid of <phi, mu_s>

  /// <phi, mu_T> - <phi, mu_0> - int G_1 phi - X - U - M at the last step.
  double spde_residual() const;
};

struct Snapshot {
  double time = 0.0;
  std::vector<double> positions;
};

struct BranchEvent {
  double time = 0.0;
  std::vector<double> position;
  int offspring = 0;
};

struct PathRecord {
  int dim = 1;
  double mass = 1.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;
  std::vector<double> times;
  std::vector<std::size_t> alive;
  std::vector<ObservableSeries> series;
  std::vector<TestFunction> observables;
  std::vector<Snapshot> snapshots;
  int snapshot_stride = 0;
  bool track_martingales = false;
  std::vector<BranchEvent> events;
  ParticleCloud final_cloud;

  /// Throws std::out_of_range for an unknown name.
  const ObservableSeries& observable(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  /// Snapshots exist for every step.
  bool has_full_snapshots() const;
};

/// Increments of one observable over one step.
struct StepIncrements {
  double X = 0.0, U = 0.0, M = 0.0, Qd = 0.0;
  double generator = 0.0;  ///< <G_1 phi, mu> at the start of the step
  double square = 0.0;     ///< <phi^2, mu> at the start of the step
};

/// The cloud together with cached jets of each observable.
///
/// A step moves every particle by one Euler increment and then applies
/// branching at the new positions; offspring inherit their parent's cached
/// jets, so nothing is re-evaluated for coincident particles.
class ParticleSystem {
 public:
  ParticleSystem(const ModelCoefficients& model, const SimulationConfig& config,
                 std::vector<TestFunction> observables, ParticleCloud cloud);

  const ParticleCloud& cloud() const { return cloud_; }
  /// Current <phi_o, mu> and <G_1 phi_o, mu>.
  double value(std::size_t o) const;
  double generator(std::size_t o) const;

  std::vector<StepIncrements> step(double dt, RandomStream& noise_rng, RandomStream& branch_rng,
                                   std::vector<BranchEvent>* events = nullptr);

 private:
  void refresh_jets();
  void branch_bernoulli(double dt, RandomStream& rng, std::vector<StepIncrements>& inc,
                        std::vector<BranchEvent>* events);
  void branch_events(double dt, RandomStream& rng, std::vector<StepIncrements>& inc,
                     std::vector<BranchEvent>* events);
  void apply_offspring(std::size_t k, int offspring, std::vector<StepIncrements>& inc,
                       std::vector<BranchEvent>* events);
  void compact();
  const Eigen::MatrixXd& diffusion(std::size_t k) const;

  const ModelCoefficients* model_;
  SimulationConfig config_;
  std::vector<TestFunction> observables_;
  ParticleCloud cloud_;
  NoiseSampler sampler_;
  std::optional<Eigen::MatrixXd> constant_diffusion_;
  mutable Eigen::MatrixXd scratch_diffusion_;
  Eigen::MatrixXd rho0_;
  std::vector<std::vector<Jet>> jets_;  ///< [observable][particle]
  std::vector<char> dead_;
};

/// One step of a bare cloud (jets evaluated on the fly).
std::vector<StepIncrements> step(ParticleCloud& cloud, const ModelCoefficients& model,
                                 const SimulationConfig& config, RandomStream& noise_rng,
                                 RandomStream& branch_rng,
                                 const std::vector<TestFunction>& observables);

/// Runs one path from mu_0 to the horizon. The path's randomness comes from
/// RandomStream(config.seed, config.replicate): substream 0 initializes the
/// cloud, substreams 2k+1 and 2k+2 drive the noise and branching of step k.
PathRecord simulate(const SimulationConfig& config, const ModelCoefficients& model,
                    const InitialMeasure& mu0, const std::vector<TestFunction>& observables);

/// Same, from a given initial cloud.
PathRecord simulate_from(const SimulationConfig& config, const ModelCoefficients& model,
                         ParticleCloud initial, const std::vector<TestFunction>& observables);

/// Trapezoidal int_0^T <phi, mu_s> ds of a registered observable.
double occupation_integral(const PathRecord& record, const std::string& name);
/// Left Riemann sum of the same series.
double occupation_left_sum(const PathRecord& record, const std::string& name);

/// Rejects models that fail the ellipticity gate at the given starting
/// positions (plus a coincident pair). Throws EllipticityViolation.
void ellipticity_gate(const ModelCoefficients& model, std::span<const double> positions);

}  // namespace sdsm

#endif  // SDSM_PARTICLES_HPP
