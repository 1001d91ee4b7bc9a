#include "dtpf/oosm.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace dtpf::oosm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<pf::Measurement> to_measurements(const std::vector<StoredMeasurement>& stored,
                                             const std::vector<model::SensorModel>& sensors) {
  std::vector<pf::Measurement> out;
  out.reserve(stored.size());
  for (const auto& m : stored)
    out.push_back({&sensors.at(static_cast<std::size_t>(m.sensor_id)), m.value});
  return out;
}

void mark_arrived(WindowStore& window, const std::vector<OosmRecord>& batch) {
  for (const auto& r : batch)
    if (window.has(r.origin_time))
      window.slot(r.origin_time).arrived.at(static_cast<std::size_t>(r.sensor_id)) = true;
}

void incorporate(WindowStore& window, const std::vector<OosmRecord>& records) {
  for (const auto& r : records)
    window.slot(r.origin_time).measurements.push_back({r.sensor_id, r.value});
}

void validate_batch(const FilterState& state, const FilterContext& ctx,
                    const std::vector<OosmRecord>& batch) {
  for (const auto& r : batch) {
    if (r.arrival_time != state.time)
      throw std::invalid_argument("generic_step: OOSM arrival time != current step");
    const int delay = r.arrival_time - r.origin_time;
    if (delay < 1 || delay > ctx.selection.ell)
      throw std::invalid_argument("generic_step: OOSM delay outside [1, ell]");
  }
}

int earliest_origin(const std::vector<OosmRecord>& batch) {
  int tau = batch.front().origin_time;
  for (const auto& r : batch) tau = std::min(tau, r.origin_time);
  return tau;
}

// Resample from the stored Gaussian before tau_min and replay the stored
// measurements through the current step, refreshing the summaries.
void garp_rerun(FilterState& state, const FilterContext& ctx, int tau_min, long batch_size) {
  state.particles =
      pf::sample_gaussian(state.window.slot(tau_min - 1).summary, ctx.n_particles, state.rng);
  for (int j = tau_min; j <= state.time; ++j) {
    WindowSlot& slot = state.window.slot(j);
    const auto meas = to_measurements(slot.measurements, *ctx.sensors);
    const pf::StepFlags flags = pf::sir_step(state.particles, meas, *ctx.state_model, state.rng);
    if (flags.weight_underflow) state.stats.weight_underflows += 1;
    slot.summary = pf::save_gauss(state.particles);
    state.stats.garp_sweeps += 1;
  }
  state.stats.garp_invocations += 1;
  state.stats.individual_garp += batch_size;
}

}  // namespace

FilterState init_filter(const FilterContext& ctx, const pf::GaussianSummary& prior,
                        std::uint64_t seed) {
  FilterState state(ctx.selection.ell, static_cast<int>(ctx.sensors->size()));
  state.rng.seed(seed);
  state.particles = pf::sample_gaussian(prior, ctx.n_particles, state.rng);
  state.time = 0;
  state.window.push(0, pf::save_gauss(state.particles));
  return state;
}

std::vector<TauGroup> group_by_tau(const std::vector<OosmRecord>& batch) {
  std::map<int, TauGroup> groups;
  for (const auto& r : batch) {
    TauGroup& g = groups[r.origin_time];
    g.tau = r.origin_time;
    g.records.push_back(r);
  }
  std::vector<TauGroup> out;
  out.reserve(groups.size());
  for (auto& [tau, g] : groups) {
    std::sort(g.records.begin(), g.records.end(),
              [](const OosmRecord& a, const OosmRecord& b) { return a.sensor_id < b.sensor_id; });
    g.combo = 0;
    for (const auto& r : g.records) g.combo |= 1u << r.sensor_id;
    out.push_back(std::move(g));
  }
  return out;
}

void generic_step(FilterState& state, const FilterContext& ctx,
                  const std::vector<StoredMeasurement>& undelayed,
                  const std::vector<OosmRecord>& batch, Strategy strategy) {
  state.time += 1;
  state.stats.steps += 1;
  validate_batch(state, ctx, batch);

  const auto meas = to_measurements(undelayed, *ctx.sensors);
  const pf::StepFlags flags = pf::sir_step(state.particles, meas, *ctx.state_model, state.rng);
  if (flags.weight_underflow) state.stats.weight_underflows += 1;

  WindowSlot& slot = state.window.push(state.time, pf::save_gauss(state.particles));
  slot.measurements = undelayed;
  for (const auto& m : undelayed) slot.arrived.at(static_cast<std::size_t>(m.sensor_id)) = true;

  if (batch.empty()) return;

  state.stats.individual_arrived += static_cast<long>(batch.size());
  state.stats.groups_arrived += static_cast<long>(group_by_tau(batch).size());

  switch (strategy) {
    case Strategy::kDiscard:
      mark_arrived(state.window, batch);
      break;
    case Strategy::kGarp:
      process_garp(state, ctx, batch);
      break;
    case Strategy::kSepfEks: {
      mark_arrived(state.window, batch);
      incorporate(state.window, batch);
      const auto sw = smooth::rts_smooth(state.window, *ctx.state_model, *ctx.sensors);
      process_sepf_eks(state, ctx, sw, group_by_tau(batch));
      break;
    }
    case Strategy::kSelective:
      process_selective(state, ctx, batch);
      break;
  }
}

void process_garp(FilterState& state, const FilterContext& ctx,
                  const std::vector<OosmRecord>& batch) {
  if (batch.empty()) throw std::invalid_argument("process_garp: empty batch");
  mark_arrived(state.window, batch);
  incorporate(state.window, batch);
  garp_rerun(state, ctx, earliest_origin(batch), static_cast<long>(batch.size()));
}

double OosmConditional::log_likelihood(const Vector& particle) const {
  const Vector mu = base + gain * particle;
  Vector innov(stacked_value.size());
  int row = 0;
  for (const auto* s : group_sensors) {
    innov.segment(row, s->meas_dim) =
        model::innovation(*s, stacked_value.segment(row, s->meas_dim), s->h(mu));
    row += s->meas_dim;
  }
  return log_norm - 0.5 * innov.dot(innov_cov_inv * innov);
}

OosmConditional make_conditional(const pf::GaussianSummary& current,
                                 const smooth::SmoothedWindow& sw, int tau,
                                 const std::vector<OosmRecord>& records,
                                 const std::vector<model::SensorModel>& sensors) {
  if (records.empty()) throw std::invalid_argument("make_conditional: empty group");
  const smooth::SmoothedStep& st = sw.at_time(tau);

  OosmConditional c;
  // gain = C_tau R_k^{-1}; computed once, the per-particle map is affine.
  // A collapsed particle set makes R_k singular; the pseudo-inverse extends
  // the conditioning over the scatter's range (particles only ever deviate
  // from mu_k inside it).
  const Matrix current_cov = mat::symmetrized(current.cov);
  try {
    c.gain = mat::spd_solve(current_cov, st.cross.transpose()).transpose();
  } catch (const mat::NotPositiveDefiniteError&) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(current_cov);
    Vector inv = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(1.0, inv.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv[i] = inv[i] > cutoff ? 1.0 / inv[i] : 0.0;
    c.gain = st.cross * eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }
  c.base = st.mean - c.gain * current.mean;
  c.cond_cov = mat::symmetrized(st.cov - c.gain * st.cross.transpose());

  int total = 0;
  for (const auto& r : records) total += sensors.at(static_cast<std::size_t>(r.sensor_id)).meas_dim;
  c.stacked_jac.resize(total, st.mean.size());
  c.stacked_value.resize(total);
  Matrix q = Matrix::Zero(total, total);
  int row = 0;
  for (const auto& r : records) {
    const auto& s = sensors.at(static_cast<std::size_t>(r.sensor_id));
    c.group_sensors.push_back(&s);
    c.stacked_jac.middleRows(row, s.meas_dim) =
        st.sensor_jac.at(static_cast<std::size_t>(r.sensor_id));
    c.stacked_value.segment(row, s.meas_dim) = r.value;
    q.block(row, row, s.meas_dim, s.meas_dim) = s.meas_noise;
    row += s.meas_dim;
  }

  c.innov_cov = mat::symmetrized(c.stacked_jac * c.cond_cov * c.stacked_jac.transpose() + q);
  c.innov_cov_inv = mat::spd_solve(c.innov_cov, Matrix::Identity(total, total));
  Eigen::LLT<Matrix> llt(c.innov_cov);
  if (llt.info() != Eigen::Success)
    throw mat::NotPositiveDefiniteError("make_conditional: innovation covariance not PD");
  double logdet = 0.0;
  for (int i = 0; i < total; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  c.log_norm = -0.5 * (static_cast<double>(total) * kLog2Pi + logdet);
  return c;
}

Vector particle_conditioned_likelihoods(const WindowStore& window,
                                        const smooth::SmoothedWindow& sw,
                                        const pf::ParticleSet& ps, int tau,
                                        const std::vector<OosmRecord>& records,
                                        const std::vector<model::SensorModel>& sensors) {
  const auto& current = window.slot(sw.current_time).summary;
  const OosmConditional c = make_conditional(current, sw, tau, records, sensors);
  Vector loglik(ps.size());
  for (int i = 0; i < ps.size(); ++i) loglik[i] = c.log_likelihood(ps.states.col(i));
  return loglik;
}

SepfOutcome apply_sepf_group(FilterState& state, const smooth::SmoothedWindow& sw,
                             const TauGroup& group,
                             const std::vector<model::SensorModel>& sensors) {
  const Vector loglik = particle_conditioned_likelihoods(state.window, sw, state.particles,
                                                         group.tau, group.records, sensors);
  const Vector previous = state.particles.weights;
  const Vector logw = previous.array().log() + loglik.array();
  if (!pf::set_weights_from_log(state.particles, logw)) {
    state.particles.weights = previous;
    return SepfOutcome::kDegenerate;
  }
  return SepfOutcome::kOk;
}

void process_sepf_eks(FilterState& state, const FilterContext& ctx,
                      const smooth::SmoothedWindow& sw, const std::vector<TauGroup>& groups) {
  for (const auto& g : groups) {
    const SepfOutcome outcome = apply_sepf_group(state, sw, g, *ctx.sensors);
    state.stats.sepf_sweeps += 1;
    state.stats.groups_admitted += 1;
    state.stats.individual_admitted += static_cast<long>(g.records.size());
    if (outcome == SepfOutcome::kDegenerate) state.stats.sepf_degeneracies += 1;
  }
}

void process_selective(FilterState& state, const FilterContext& ctx,
                       const std::vector<OosmRecord>& batch) {
  const auto sw = smooth::rts_smooth(state.window, *ctx.state_model, *ctx.sensors);
  const auto candidates = select::enumerate_candidates(sw, state.window, *ctx.sensors,
                                                       ctx.selection, ctx.first_meas_time);
  const auto threshold = select::calc_gamma(candidates, ctx.selection.c_ave);

  // Decisions are made against the pre-arrival bookkeeping; mark afterwards.
  mark_arrived(state.window, batch);

  std::map<std::pair<int, std::uint32_t>, double> diminished;
  for (const auto& c : candidates) diminished[{c.tau, c.combo}] = c.diminished;

  const auto groups = group_by_tau(batch);
  bool eks_failed = false;
  std::vector<bool> incorporated(groups.size(), false);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const TauGroup& g = groups[gi];
    const auto it = diminished.find({g.tau, g.combo});
    if (it == diminished.end())
      throw std::logic_error("process_selective: arriving group missing from the candidate set");
    if (it->second < threshold.gamma) continue;

    const double ess_prior = pf::effective_sample_size(state.particles);
    const SepfOutcome outcome = apply_sepf_group(state, sw, g, *ctx.sensors);
    const double ess_post = pf::effective_sample_size(state.particles);
    state.stats.sepf_sweeps += 1;
    state.stats.groups_admitted += 1;
    state.stats.individual_admitted += static_cast<long>(g.records.size());
    incorporate(state.window, g.records);
    incorporated[gi] = true;

    if (outcome == SepfOutcome::kDegenerate || ess_post < ctx.selection.nu * ess_prior) {
      if (outcome == SepfOutcome::kDegenerate) state.stats.sepf_degeneracies += 1;
      eks_failed = true;
      break;
    }
  }

  if (!eks_failed) return;

  // Reweighting abandoned; GARP replays the stored measurements with the
  // whole batch folded in.
  std::vector<OosmRecord> remaining;
  for (std::size_t gi = 0; gi < groups.size(); ++gi)
    if (!incorporated[gi])
      remaining.insert(remaining.end(), groups[gi].records.begin(), groups[gi].records.end());
  incorporate(state.window, remaining);
  garp_rerun(state, ctx, earliest_origin(batch), static_cast<long>(batch.size()));
}

}  // namespace dtpf::oosm
