#include "dtpf/pf.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dtpf::pf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

struct MeasurementCache {
  const Measurement* m;
  Eigen::LLT<Matrix> llt;  // of Q
  double log_norm;         // -(m*log 2pi + log det Q)/2
};

MeasurementCache make_cache(const Measurement& m) {
  MeasurementCache c;
  c.m = &m;
  const Matrix q = mat::symmetrized(m.sensor->meas_noise);
  c.llt.compute(q);
  if (c.llt.info() != Eigen::Success)
    throw mat::NotPositiveDefiniteError("sir_step: measurement noise not positive definite");
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) logdet += 2.0 * std::log(c.llt.matrixL()(i, i));
  c.log_norm = -0.5 * (static_cast<double>(q.rows()) * kLog2Pi + logdet);
  return c;
}

double cached_loglik(const MeasurementCache& c, const Vector& state) {
  const Vector hx = c.m->sensor->h(state);
  const Vector e = model::innovation(*c.m->sensor, c.m->value, hx);
  return c.log_norm - 0.5 * e.dot(c.llt.solve(e));
}

}  // namespace

StepFlags sir_step(ParticleSet& ps, const std::vector<Measurement>& meas,
                   const model::StateModel& model, Rng& rng) {
  const int n = ps.size();
  if (n < 1) throw std::invalid_argument("sir_step: empty particle set");

  // Propagate with process-noise draws.
  const Matrix noise_sqrt = mat::psd_sqrt(model.process_noise);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int d = ps.dim();
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    Vector x = model.f(ps.states.col(i));
    for (int j = 0; j < d; ++j) z[j] = unit(rng);
    ps.states.col(i) = x + noise_sqrt * z;
  }

  StepFlags flags;
  if (!meas.empty()) {
    std::vector<MeasurementCache> caches;
    caches.reserve(meas.size());
    for (const auto& m : meas) caches.push_back(make_cache(m));
    Vector logw = ps.weights.array().log();
    for (int i = 0; i < n; ++i) {
      double acc = logw[i];
      for (const auto& c : caches) acc += cached_loglik(c, ps.states.col(i));
      logw[i] = acc;
    }
    flags.weight_underflow = !set_weights_from_log(ps, logw);
  }

  systematic_resample(ps, rng);
  return flags;
}

double effective_sample_size(const ParticleSet& ps) {
  const double s = ps.weights.squaredNorm();
  return s > 0.0 ? 1.0 / s : 0.0;
}

GaussianSummary save_gauss(const ParticleSet& ps) {
  GaussianSummary g;
  g.mean = ps.states * ps.weights;
  const Matrix centered = ps.states.colwise() - g.mean;
  g.cov = mat::symmetrized(centered * ps.weights.asDiagonal() * centered.transpose());
  return g;
}

ParticleSet sample_gaussian(const GaussianSummary& g, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_gaussian: need at least one particle");
  const Matrix s = mat::psd_sqrt(g.cov);
  const int d = static_cast<int>(g.mean.size());
  ParticleSet ps;
  ps.states.resize(d, n);
  ps.weights = Vector::Constant(n, 1.0 / n);
  std::normal_distribution<double> unit(0.0, 1.0);
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z[j] = unit(rng);
    ps.states.col(i) = g.mean + s * z;
  }
  return ps;
}

void systematic_resample(ParticleSet& ps, Rng& rng) {
  const int n = ps.size();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double start = uni(rng) / n;
  Matrix out(ps.states.rows(), n);
  double cum = ps.weights[0];
  int i = 0;
  for (int j = 0; j < n; ++j) {
    const double u = start + static_cast<double>(j) / n;
    while (u > cum && i + 1 < n) cum += ps.weights[++i];
    out.col(j) = ps.states.col(i);
  }
  ps.states.swap(out);
  ps.weights.setConstant(1.0 / n);
}

bool set_weights_from_log(ParticleSet& ps, const Vector& logw) {
  const double mx = logw.maxCoeff();
  if (!std::isfinite(mx)) {
    ps.weights.setConstant(1.0 / ps.size());
    return false;
  }
  Vector w = (logw.array() - mx).exp();
  const double total = w.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    ps.weights.setConstant(1.0 / ps.size());
    return false;
  }
  ps.weights = w / total;
  return true;
}

}  // namespace dtpf::pf
