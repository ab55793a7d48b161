#include "sdsm/dual.hpp"

#include <cmath>
#include <stdexcept>

#include "sdsm/errors.hpp"
#include "sdsm/noise.hpp"
#include "sdsm/parallel.hpp"
#include "sdsm/stats.hpp"

namespace sdsm {

double DualRun::weight() const { return std::exp(log_weight); }

double dual_weight(const DualRun& run) {
  double s = 0.0;
  for (std::size_t l = 2; l < run.sojourn.size(); ++l) s += double(l) * (l - 1) * run.sojourn[l];
  return std::exp(0.5 * run.gamma_sigma2 * s);
}

DualRun sample_jump_chain(int m, double t, double gamma_sigma2, RandomStream& rng) {
  if (m < 1) throw std::invalid_argument("dual process needs m >= 1");
  if (!(t >= 0.0)) throw std::invalid_argument("dual process needs t >= 0");
  if (!(gamma_sigma2 >= 0.0)) throw std::invalid_argument("gamma sigma^2 must be non-negative");
  DualRun run;
  run.m = m;
  run.t = t;
  run.gamma_sigma2 = gamma_sigma2;
  run.sojourn.assign(m + 1, 0.0);
  int level = m;
  double now = 0.0;
  while (level > 1 && gamma_sigma2 > 0.0) {
    double rate = gamma_sigma2 * level * (level - 1) / 2.0;
    double wait = rng.exponential(rate);
    if (now + wait > t) break;
    run.sojourn[level] += wait;
    now += wait;
    int i = static_cast<int>(rng.uniform_index(level));
    int j = static_cast<int>(rng.uniform_index(level - 1));
    if (j >= i) ++j;
    run.jump_times.push_back(now);
    run.pairs.emplace_back(i, j);
    --level;
    run.levels.push_back(level);
  }
  run.sojourn[level] += t - now;
  double s = 0.0;
  for (int l = 2; l <= m; ++l) s += double(l) * (l - 1) * run.sojourn[l];
  run.log_weight = 0.5 * gamma_sigma2 * s;
  return run;
}

MultiFunction tensor_power(const TestFunction& phi, int m) {
  const int d = phi.dim();
  return [phi, m, d](std::span<const double> x) {
    double p = 1.0;
    for (int k = 0; k < m; ++k) p *= phi.value(x.subspan(static_cast<std::size_t>(k) * d, d));
    return p;
  };
}

namespace {

void diffuse(std::vector<double>& positions, double duration, double dt, const NoiseSampler& sampler,
             RandomStream& base, std::uint64_t& substream) {
  if (duration <= 0.0 || positions.empty()) return;
  int steps = std::max(1, static_cast<int>(std::ceil(duration / dt - 1e-9)));
  double h = duration / steps;
  for (int s = 0; s < steps; ++s) {
    RandomStream rng = base.substream(substream++);
    auto inc = sampler.sample(positions, h, rng);
    for (std::size_t i = 0; i < positions.size(); ++i)
      positions[i] += inc.individual[i] + inc.common[i];
  }
}

}  // namespace

double dual_replicate(const MultiFunction& f, const InitialMeasure& mu0,
                      const ModelCoefficients& model, int m, double t, double dt,
                      RandomStream rng) {
  const int d = model.dim();
  RandomStream chain_rng = rng.substream(0);
  DualRun run = sample_jump_chain(m, t, model.gamma() * model.offspring().sigma2(), chain_rng);
  NoiseSampler sampler(model);
  std::uint64_t substream = 1;

  int level = run.final_level();
  std::vector<double> x(static_cast<std::size_t>(level) * d);
  RandomStream init = rng.substream(substream++);
  for (int k = 0; k < level; ++k) mu0.sample(init, x.data() + static_cast<std::size_t>(k) * d);

  // Walk the jumps from the latest to the earliest.
  double upper = t;
  for (int q = static_cast<int>(run.jump_times.size()) - 1; q >= 0; --q) {
    diffuse(x, upper - run.jump_times[q], dt, sampler, rng, substream);
    upper = run.jump_times[q];
    auto [i, j] = run.pairs[q];
    int grown = level + 1;
    std::vector<double> y(static_cast<std::size_t>(grown) * d);
    for (int slot = 0, src = 0; slot < grown; ++slot) {
      if (slot == j) continue;
      for (int p = 0; p < d; ++p) y[slot * d + p] = x[src * d + p];
      ++src;
    }
    for (int p = 0; p < d; ++p) y[j * d + p] = y[i * d + p];
    x.swap(y);
    level = grown;
  }
  diffuse(x, upper, dt, sampler, rng, substream);
  if (level != m) throw std::logic_error("duplication bookkeeping lost a coordinate");
  return run.weight() * std::pow(mu0.total_mass(), run.final_level()) * f(x);
}

DualMomentResult dual_moment(const MultiFunction& f, const InitialMeasure& mu0,
                             const ModelCoefficients& model, const DualMomentConfig& config) {
  if (config.m < 1) throw ConfigError("dual moments need m >= 1");
  if (!(config.dt > 0.0)) throw ConfigError("dual dt must be positive");
  if (mu0.dim() != model.dim()) throw ConfigError("initial measure dimension does not match the model");
  auto values = parallel_map(config.reps, config.workers, [&](std::size_t r) {
    return dual_replicate(f, mu0, model, config.m, config.t, config.dt,
                          RandomStream(config.seed, r));
  });
  std::vector<double> kept;
  kept.reserve(values.size());
  DualMomentResult res;
  res.reps = values.size();
  for (double v : values) {
    if (std::isfinite(v)) kept.push_back(v);
    else ++res.rejected;
  }
  auto est = stats::mean(kept);
  res.estimate = est.value;
  res.se = est.se;
  return res;
}

std::vector<CrossCheckEntry> cross_check(const std::vector<MomentEstimate>& particle,
                                         const std::vector<MomentEstimate>& dual) {
  std::vector<CrossCheckEntry> out;
  for (const auto& p : particle) {
    const MomentEstimate* match = nullptr;
    for (const auto& q : dual) {
      if (q.observable == p.observable && q.m == p.m) {
        if (q.config_id != p.config_id)
          throw ConfigError("cross_check: configuration ids differ for " + p.observable);
        match = &q;
      }
    }
    if (!match) throw ConfigError("cross_check: no dual estimate for " + p.observable);
    CrossCheckEntry e;
    e.observable = p.observable;
    e.m = p.m;
    e.particle = p.value;
    e.particle_se = p.se;
    e.dual = match->value;
    e.dual_se = match->se;
    e.z = stats::z_score(p.value, p.se, match->value, match->se);
    e.flagged = std::abs(e.z) > 3.0;
    out.push_back(e);
  }
  return out;
}

}  // namespace sdsm
