#include "sdsm/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdsm/errors.hpp"

namespace sdsm {

LowRankFactor pivoted_cholesky(int n, const std::function<double(int)>& diagonal,
                               const std::function<void(int, std::vector<double>&)>& column,
                               double tol) {
  LowRankFactor f;
  f.rows = n;
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = diagonal(i);
  std::vector<double> col(n);
  for (int k = 0; k < n; ++k) {
    int j = 0;
    for (int i = 1; i < n; ++i)
      if (d[i] > d[j]) j = i;
    if (n == 0 || d[j] <= tol) break;
    column(j, col);
    double pivot = std::sqrt(d[j]);
    f.L.resize(static_cast<std::size_t>(k + 1) * n);
    double* out = f.L.data() + static_cast<std::size_t>(k) * n;
    for (int i = 0; i < n; ++i) {
      double s = col[i];
      for (int l = 0; l < k; ++l) s -= f.L[static_cast<std::size_t>(l) * n + i] * f.L[static_cast<std::size_t>(l) * n + j];
      out[i] = s / pivot;
    }
    for (int i = 0; i < n; ++i) {
      d[i] -= out[i] * out[i];
      if (d[i] < 0.0) {
        if (d[i] < -tol) throw ModelError("covariance is not positive semidefinite");
        d[i] = 0.0;
      }
    }
    d[j] = 0.0;
    f.rank = k + 1;
  }
  return f;
}

std::vector<int> canonical_order(std::span<const double> positions, int dim) {
  int m = static_cast<int>(positions.size()) / dim;
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    for (int p = 0; p < dim; ++p) {
      double xa = positions[a * dim + p], xb = positions[b * dim + p];
      if (xa != xb) return xa < xb;
    }
    return false;
  });
  return order;
}

NoiseSampler::NoiseSampler(const ModelCoefficients& model, double tol) : model_(&model), tol_(tol) {}

StepIncrement NoiseSampler::sample(std::span<const double> positions, double dt,
                                   RandomStream& rng) const {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  const int d = model_->dim();
  const int m = static_cast<int>(positions.size()) / d;
  StepIncrement inc;
  inc.dim = d;
  inc.individual.assign(positions.size(), 0.0);
  inc.common.assign(positions.size(), 0.0);
  if (m == 0) return inc;
  const double sdt = std::sqrt(dt);
  auto order = canonical_order(positions, d);

  // Individual part, N(0, a(x_k) dt) via c(x_k) z.
  const auto& cc = model_->constant_c();
  std::vector<double> z(d);
  for (int k : order) {
    for (int p = 0; p < d; ++p) z[p] = rng.normal();
    Eigen::MatrixXd c = cc ? *cc : model_->c(positions.subspan(static_cast<std::size_t>(k) * d, d));
    for (int p = 0; p < d; ++p) {
      double s = 0.0;
      for (int r = 0; r < d; ++r) s += c(p, r) * z[r];
      inc.individual[k * d + p] = s * sdt;
    }
  }

  if (model_->zero_medium()) {
    last_rank_ = 0;
    return inc;
  }

  // Sorted copy of the positions, so pivot ties resolve label-free.
  std::vector<double> xs(positions.size());
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < d; ++p) xs[i * d + p] = positions[order[i] * d + p];

  const auto& gm = model_->gaussian_medium();
  if (gm) {
    const double inv4s2 = 1.0 / (4.0 * gm->scale * gm->scale);
    auto factor = pivoted_cholesky(
        m, [](int) { return 1.0; },
        [&](int j, std::vector<double>& col) {
          const double* xj = xs.data() + static_cast<std::size_t>(j) * d;
          for (int i = 0; i < m; ++i) {
            const double* xi = xs.data() + static_cast<std::size_t>(i) * d;
            double r2 = 0.0;
            for (int p = 0; p < d; ++p) r2 += (xi[p] - xj[p]) * (xi[p] - xj[p]);
            col[i] = std::exp(-r2 * inv4s2);
          }
        },
        tol_);
    last_rank_ = factor.rank;
    std::vector<double> w(factor.rank);
    for (auto& v : w) v = rng.normal();
    for (int i = 0; i < m; ++i) {
      double xi = 0.0;
      for (int k = 0; k < factor.rank; ++k) xi += factor(i, k) * w[k];
      xi *= sdt;
      for (int p = 0; p < d; ++p) inc.common[order[i] * d + p] = gm->amplitude[p] * xi;
    }
    return inc;
  }

  // General medium: factor the dm x dm matrix of rho blocks.
  const int n = m * d;
  Eigen::MatrixXd rho0 = rho(*model_, std::vector<double>(d, 0.0));
  auto factor = pivoted_cholesky(
      n, [&](int i) { return rho0(i % d, i % d); },
      [&](int j, std::vector<double>& col) {
        int pj = j / d, qj = j % d;
        std::vector<double> z(d);
        for (int i = 0; i < m; ++i) {
          Eigen::MatrixXd block;
          if (i == pj) {
            block = rho0;
          } else {
            for (int p = 0; p < d; ++p) z[p] = xs[i * d + p] - xs[pj * d + p];
            block = rho(*model_, z);
          }
          for (int p = 0; p < d; ++p) col[i * d + p] = block(p, qj);
        }
      },
      tol_);
  last_rank_ = factor.rank;
  std::vector<double> w(factor.rank);
  for (auto& v : w) v = rng.normal();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = 0; k < factor.rank; ++k) s += factor(i, k) * w[k];
    inc.common[order[i / d] * d + i % d] = s * sdt;
  }
  return inc;
}

StepIncrement sample_step(const ModelCoefficients& model, std::span<const double> positions,
                          double dt, RandomStream& rng) {
  return NoiseSampler(model).sample(positions, dt, rng);
}

double common_martingale_increment(const StepIncrement& increment, const TestFunction& phi,
                                   std::span<const double> positions, double mass) {
  const int d = increment.dim;
  const std::size_t m = increment.particles();
  double s = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    Jet j = phi.jet(positions.subspan(k * d, d));
    for (int p = 0; p < d; ++p) s += j.grad[p] * increment.common[k * d + p];
  }
  return mass * s;
}

}  // namespace sdsm
