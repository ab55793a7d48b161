#include "sdsm/particles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sdsm/errors.hpp"

namespace sdsm {

InitialMeasure InitialMeasure::point_mass(std::vector<double> x, double mass) {
  int d = static_cast<int>(x.size());
  return point_masses(d, std::move(x), {mass});
}

InitialMeasure InitialMeasure::point_masses(int dim, std::vector<double> points,
                                            std::vector<double> weights) {
  if (dim < 1) throw ConfigError("initial measure dimension must be positive");
  if (points.size() != weights.size() * dim)
    throw ConfigError("initial measure: points and weights do not match");
  InitialMeasure m;
  m.kind_ = Kind::point_masses;
  m.dim_ = dim;
  m.points_ = std::move(points);
  m.weights_ = std::move(weights);
  double total = 0.0;
  for (double w : m.weights_) {
    if (!(w >= 0.0)) throw ConfigError("initial measure: negative weight");
    total += w;
    m.cdf_.push_back(total);
  }
  m.mass_ = total;
  return m;
}

InitialMeasure InitialMeasure::gaussian(std::vector<double> mean, double sd, double mass) {
  if (!(sd > 0.0) || !(mass >= 0.0)) throw ConfigError("gaussian initial measure: bad parameters");
  InitialMeasure m;
  m.kind_ = Kind::gaussian;
  m.dim_ = static_cast<int>(mean.size());
  m.points_ = std::move(mean);
  m.sd_ = sd;
  m.mass_ = mass;
  return m;
}

InitialMeasure InitialMeasure::uniform_box(std::vector<double> lo, std::vector<double> hi,
                                           double mass) {
  if (lo.size() != hi.size() || lo.empty() || !(mass >= 0.0))
    throw ConfigError("uniform initial measure: bad parameters");
  for (std::size_t p = 0; p < lo.size(); ++p)
    if (!(hi[p] > lo[p])) throw ConfigError("uniform initial measure: empty box");
  InitialMeasure m;
  m.kind_ = Kind::uniform_box;
  m.dim_ = static_cast<int>(lo.size());
  m.lo_ = std::move(lo);
  m.hi_ = std::move(hi);
  m.mass_ = mass;
  return m;
}

void InitialMeasure::sample(RandomStream& rng, double* out) const {
  switch (kind_) {
    case Kind::point_masses: {
      double u = rng.uniform() * mass_;
      std::size_t i = std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin();
      i = std::min(i, weights_.size() - 1);
      for (int p = 0; p < dim_; ++p) out[p] = points_[i * dim_ + p];
      return;
    }
    case Kind::gaussian:
      for (int p = 0; p < dim_; ++p) out[p] = points_[p] + sd_ * rng.normal();
      return;
    case Kind::uniform_box:
      for (int p = 0; p < dim_; ++p) out[p] = lo_[p] + (hi_[p] - lo_[p]) * rng.uniform();
      return;
  }
}

ParticleCloud init_cloud(const InitialMeasure& mu0, double theta, int n, RandomStream& rng,
                         bool lineage) {
  if (!(theta > 1.0) || n < 0) throw ConfigError("need theta > 1 and n >= 0");
  ParticleCloud cloud;
  cloud.dim = mu0.dim();
  cloud.theta = theta;
  cloud.n = n;
  double tn = std::pow(theta, n);
  cloud.mass = 1.0 / tn;
  auto m0 = static_cast<std::size_t>(std::llround(mu0.total_mass() * tn));
  cloud.positions.resize(m0 * cloud.dim);
  for (std::size_t k = 0; k < m0; ++k) mu0.sample(rng, cloud.positions.data() + k * cloud.dim);
  if (lineage)
    for (std::size_t k = 0; k < m0; ++k) cloud.lineage.push_back(std::to_string(k + 1));
  return cloud;
}

double SimulationConfig::theta_n() const { return std::pow(theta, n); }

int SimulationConfig::steps() const {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(horizon >= 0.0)) throw ConfigError("horizon must be non-negative");
  double k = std::round(horizon / dt);
  if (std::abs(k * dt - horizon) > 1e-9 * std::max(1.0, horizon))
    throw ConfigError("horizon must be a whole number of steps");
  return static_cast<int>(k);
}

void SimulationConfig::validate(const ModelCoefficients& model) const {
  steps();
  if (!(theta > 1.0) || n < 0) throw ConfigError("need theta > 1 and n >= 0");
  if (snapshot_stride < 0) throw ConfigError("snapshot stride must be non-negative");
  if (branching == BranchingMode::bernoulli && model.gamma() * theta_n() * dt > 0.1 + 1e-12)
    throw ConfigError("gamma theta^n dt = " + std::to_string(model.gamma() * theta_n() * dt) +
                      " exceeds the 0.1 cap; reduce dt or use exact_events branching");
}

double ObservableSeries::spde_residual() const {
  return value.back() - value.front() - generator_integral.back() - X.back() - U.back() -
         M.back();
}

const ObservableSeries& PathRecord::observable(const std::string& name) const {
  return series.at(index_of(name));
}

std::size_t PathRecord::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series[i].name == name) return i;
  throw std::out_of_range("unknown observable: " + name);
}

bool PathRecord::has_full_snapshots() const {
  return snapshot_stride == 1 && snapshots.size() == times.size();
}

void ellipticity_gate(const ModelCoefficients& model, std::span<const double> positions) {
  const int d = model.dim();
  std::vector<double> probe;
  std::size_t m = positions.size() / d;
  for (std::size_t k = 0; k < m && probe.size() < 8u * d; ++k) {
    bool seen = false;
    for (std::size_t j = 0; j < probe.size() / d && !seen; ++j)
      seen = std::equal(probe.begin() + j * d, probe.begin() + (j + 1) * d, positions.begin() + k * d);
    if (!seen) probe.insert(probe.end(), positions.begin() + k * d, positions.begin() + (k + 1) * d);
  }
  if (probe.empty()) probe.assign(d, 0.0);
  // A coincident pair exposes a degenerate individual diffusion.
  probe.insert(probe.end(), probe.begin(), probe.begin() + d);
  check_ellipticity(model, probe);
}

ParticleSystem::ParticleSystem(const ModelCoefficients& model, const SimulationConfig& config,
                               std::vector<TestFunction> observables, ParticleCloud cloud)
    : model_(&model),
      config_(config),
      observables_(std::move(observables)),
      cloud_(std::move(cloud)),
      sampler_(model) {
  if (cloud_.dim != model.dim()) throw ConfigError("cloud dimension does not match the model");
  for (const auto& f : observables_)
    if (f.dim() != model.dim()) throw ConfigError("observable dimension does not match the model");
  rho0_ = rho(model, std::vector<double>(model.dim(), 0.0));
  if (model.constant_c()) {
    const auto& c = *model.constant_c();
    constant_diffusion_ = c * c.transpose() + rho0_;
  }
  jets_.resize(observables_.size());
  refresh_jets();
}

const Eigen::MatrixXd& ParticleSystem::diffusion(std::size_t k) const {
  if (constant_diffusion_) return *constant_diffusion_;
  scratch_diffusion_ = model_->a(cloud_.position(k)) + rho0_;
  return scratch_diffusion_;
}

void ParticleSystem::refresh_jets() {
  const std::size_t m = cloud_.size();
  for (std::size_t o = 0; o < observables_.size(); ++o) {
    auto& js = jets_[o];
    js.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      if (config_.track_martingales) {
        js[k] = observables_[o].jet(cloud_.position(k));
      } else {
        js[k] = Jet{};
        js[k].value = observables_[o].value(cloud_.position(k));
      }
    }
  }
}

double ParticleSystem::value(std::size_t o) const {
  double s = 0.0;
  for (const auto& j : jets_[o]) s += j.value;
  return s * cloud_.mass;
}

double ParticleSystem::generator(std::size_t o) const {
  if (!config_.track_martingales) return 0.0;
  const int d = cloud_.dim;
  double s = 0.0;
  for (std::size_t k = 0; k < jets_[o].size(); ++k) {
    const auto& A = diffusion(k);
    const auto& j = jets_[o][k];
    for (int p = 0; p < d; ++p)
      for (int q = 0; q < d; ++q) s += 0.5 * A(p, q) * j.hess[p * kMaxDim + q];
  }
  return s * cloud_.mass;
}

std::vector<StepIncrements> ParticleSystem::step(double dt, RandomStream& noise_rng,
                                                 RandomStream& branch_rng,
                                                 std::vector<BranchEvent>* events) {
  const int d = cloud_.dim;
  const std::size_t m = cloud_.size();
  const double mass = cloud_.mass;
  std::vector<StepIncrements> inc(observables_.size());

  if (config_.track_martingales) {
    for (std::size_t o = 0; o < observables_.size(); ++o) {
      inc[o].generator = generator(o);
      double sq = 0.0;
      for (const auto& j : jets_[o]) sq += j.value * j.value;
      inc[o].square = sq * mass;
    }
  }

  StepIncrement delta = sampler_.sample(cloud_.positions, dt, noise_rng);

  if (config_.track_martingales) {
    for (std::size_t o = 0; o < observables_.size(); ++o) {
      double x = 0, u = 0, qd = 0;
      for (std::size_t k = 0; k < m; ++k) {
        const auto& j = jets_[o][k];
        const auto& A = diffusion(k);
        for (int p = 0; p < d; ++p) {
          x += j.grad[p] * delta.common[k * d + p];
          u += j.grad[p] * delta.individual[k * d + p];
          for (int q = 0; q < d; ++q) {
            double dp = delta.total(k, p), dq = delta.total(k, q);
            qd += 0.5 * j.hess[p * kMaxDim + q] * (dp * dq - A(p, q) * dt);
          }
        }
      }
      inc[o].X = x * mass;
      inc[o].U = u * mass;
      inc[o].Qd = qd * mass;
    }
  }

  for (std::size_t i = 0; i < cloud_.positions.size(); ++i)
    cloud_.positions[i] += delta.individual[i] + delta.common[i];
  refresh_jets();

  if (model_->gamma() > 0.0) {
    if (config_.branching == BranchingMode::bernoulli)
      branch_bernoulli(dt, branch_rng, inc, events);
    else
      branch_events(dt, branch_rng, inc, events);
  }
  cloud_.time += dt;
  return inc;
}

void ParticleSystem::apply_offspring(std::size_t k, int offspring, std::vector<StepIncrements>& inc,
                                     std::vector<BranchEvent>* events) {
  const int d = cloud_.dim;
  for (std::size_t o = 0; o < observables_.size(); ++o)
    inc[o].M += (offspring - 1) * cloud_.mass * jets_[o][k].value;
  if (offspring == 0) {
    dead_[k] = 1;
    return;
  }
  std::string label = cloud_.lineage.empty() ? std::string() : cloud_.lineage[k];
  for (int c = 1; c < offspring; ++c) {
    for (int p = 0; p < d; ++p) cloud_.positions.push_back(cloud_.positions[k * d + p]);
    for (std::size_t o = 0; o < observables_.size(); ++o) jets_[o].push_back(jets_[o][k]);
    dead_.push_back(0);
    if (!cloud_.lineage.empty()) cloud_.lineage.push_back(label + "⊕" + std::to_string(c + 1));
  }
  if (!cloud_.lineage.empty()) cloud_.lineage[k] = label + "⊕1";
  (void)events;
}

void ParticleSystem::compact() {
  const int d = cloud_.dim;
  std::size_t w = 0;
  for (std::size_t k = 0; k < dead_.size(); ++k) {
    if (dead_[k]) continue;
    if (w != k) {
      for (int p = 0; p < d; ++p) cloud_.positions[w * d + p] = cloud_.positions[k * d + p];
      for (auto& js : jets_) js[w] = js[k];
      if (!cloud_.lineage.empty()) cloud_.lineage[w] = std::move(cloud_.lineage[k]);
    }
    ++w;
  }
  cloud_.positions.resize(w * d);
  for (auto& js : jets_) js.resize(w);
  if (!cloud_.lineage.empty()) cloud_.lineage.resize(w);
  dead_.clear();
}

void ParticleSystem::branch_bernoulli(double dt, RandomStream& rng, std::vector<StepIncrements>& inc,
                                      std::vector<BranchEvent>* events) {
  const std::size_t m = cloud_.size();
  const double p = 1.0 - std::exp(-model_->gamma() * config_.theta_n() * dt);
  dead_.assign(m, 0);
  for (std::size_t k = 0; k < m; ++k) {
    if (rng.uniform() >= p) continue;
    int offspring = model_->offspring().sample(rng);
    if (events) {
      auto pos = cloud_.position(k);
      events->push_back({cloud_.time + dt, std::vector<double>(pos.begin(), pos.end()), offspring});
    }
    apply_offspring(k, offspring, inc, events);
  }
  compact();
}

void ParticleSystem::branch_events(double dt, RandomStream& rng, std::vector<StepIncrements>& inc,
                                   std::vector<BranchEvent>* events) {
  const double rate = model_->gamma() * config_.theta_n();
  const int d = cloud_.dim;
  double t = 0.0;
  dead_.assign(cloud_.size(), 0);
  for (;;) {
    std::size_t alive = cloud_.size();
    if (alive == 0) break;
    t += rng.exponential(rate * alive);
    if (t > dt) break;
    std::size_t k = rng.uniform_index(alive);
    int offspring = model_->offspring().sample(rng);
    if (events) {
      auto pos = cloud_.position(k);
      events->push_back({cloud_.time + t, std::vector<double>(pos.begin(), pos.end()), offspring});
    }
    apply_offspring(k, offspring, inc, events);
    if (offspring == 0) {
      // Swap-remove keeps the alive set contiguous for uniform selection.
      std::size_t last = alive - 1;
      if (k != last) {
        for (int p = 0; p < d; ++p) cloud_.positions[k * d + p] = cloud_.positions[last * d + p];
        for (auto& js : jets_) js[k] = js[last];
        if (!cloud_.lineage.empty()) cloud_.lineage[k] = std::move(cloud_.lineage[last]);
      }
      cloud_.positions.resize(last * d);
      for (auto& js : jets_) js.resize(last);
      if (!cloud_.lineage.empty()) cloud_.lineage.resize(last);
      dead_.resize(last);
    }
  }
  dead_.clear();
}

std::vector<StepIncrements> step(ParticleCloud& cloud, const ModelCoefficients& model,
                                 const SimulationConfig& config, RandomStream& noise_rng,
                                 RandomStream& branch_rng,
                                 const std::vector<TestFunction>& observables) {
  config.validate(model);
  ParticleSystem sys(model, config, observables, std::move(cloud));
  auto inc = sys.step(config.dt, noise_rng, branch_rng);
  cloud = sys.cloud();
  return inc;
}

namespace {

void push_record(PathRecord& rec, const ParticleSystem& sys, double t) {
  rec.times.push_back(t);
  rec.alive.push_back(sys.cloud().size());
  for (std::size_t o = 0; o < rec.series.size(); ++o) {
    rec.series[o].value.push_back(sys.value(o));
    rec.series[o].generator.push_back(sys.generator(o));
  }
}

}  // namespace

PathRecord simulate_from(const SimulationConfig& config, const ModelCoefficients& model,
                         ParticleCloud initial, const std::vector<TestFunction>& observables) {
  config.validate(model);
  if (!config.allow_degenerate) ellipticity_gate(model, initial.positions);
  const int steps = config.steps();
  RandomStream base(config.seed, config.replicate);

  PathRecord rec;
  rec.dim = model.dim();
  rec.mass = initial.mass;
  rec.dt = config.dt;
  rec.seed = config.seed;
  rec.replicate = config.replicate;
  rec.observables = observables;
  rec.snapshot_stride = config.snapshot_stride;
  rec.track_martingales = config.track_martingales;
  for (const auto& f : observables) {
    ObservableSeries s;
    s.name = f.name();
    for (const auto& other : rec.series)
      if (other.name == s.name) throw ConfigError("duplicate observable name: " + s.name);
    s.X = s.U = s.M = s.Qd = s.generator_integral = s.square_integral = s.occupation = {0.0};
    rec.series.push_back(std::move(s));
  }

  ParticleSystem sys(model, config, observables, std::move(initial));
  push_record(rec, sys, 0.0);
  if (config.snapshot_stride > 0) rec.snapshots.push_back({0.0, sys.cloud().positions});

  std::vector<BranchEvent>* events = config.log_events ? &rec.events : nullptr;
  for (int k = 0; k < steps; ++k) {
    RandomStream noise = base.substream(2 * static_cast<std::uint64_t>(k) + 1);
    RandomStream branch = base.substream(2 * static_cast<std::uint64_t>(k) + 2);
    auto inc = sys.step(config.dt, noise, branch, events);
    double t = (k + 1) * config.dt;
    push_record(rec, sys, t);
    for (std::size_t o = 0; o < rec.series.size(); ++o) {
      auto& s = rec.series[o];
      s.X.push_back(s.X.back() + inc[o].X);
      s.U.push_back(s.U.back() + inc[o].U);
      s.M.push_back(s.M.back() + inc[o].M);
      s.Qd.push_back(s.Qd.back() + inc[o].Qd);
      s.generator_integral.push_back(s.generator_integral.back() + inc[o].generator * config.dt);
      s.square_integral.push_back(s.square_integral.back() + inc[o].square * config.dt);
      s.occupation.push_back(s.occupation.back() +
                             0.5 * (s.value[k] + s.value[k + 1]) * config.dt);
    }
    if (config.snapshot_stride > 0 && (k + 1) % config.snapshot_stride == 0)
      rec.snapshots.push_back({t, sys.cloud().positions});
  }
  rec.final_cloud = sys.cloud();
  return rec;
}

PathRecord simulate(const SimulationConfig& config, const ModelCoefficients& model,
                    const InitialMeasure& mu0, const std::vector<TestFunction>& observables) {
  if (mu0.dim() != model.dim()) throw ConfigError("initial measure dimension does not match the model");
  RandomStream init = RandomStream(config.seed, config.replicate).substream(0);
  ParticleCloud cloud = init_cloud(mu0, config.theta, config.n, init, config.lineage);
  return simulate_from(config, model, std::move(cloud), observables);
}

double occupation_integral(const PathRecord& record, const std::string& name) {
  return record.observable(name).occupation.back();
}

double occupation_left_sum(const PathRecord& record, const std::string& name) {
  const auto& v = record.observable(name).value;
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < v.size(); ++k) s += v[k] * record.dt;
  return s;
}

}  // namespace sdsm
