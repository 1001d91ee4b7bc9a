#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dtpf/select.hpp"
#include "dtpf/smooth.hpp"
#include "dtpf/window.hpp"

namespace dtpf::oosm {

enum class Strategy {
  kDiscard,    // ignore every OOSM
  kGarp,       // rerun from the stored Gaussian before the earliest OOSM
  kSepfEks,    // reweight particles through the smoother likelihood
  kSelective,  // utility-thresholded SEPF with GARP escalation
};

struct FilterStats {
  long steps = 0;
  long sepf_sweeps = 0;             // tau-group reweightings performed
  long garp_invocations = 0;        // GARP runs (escalations for kSelective)
  long garp_sweeps = 0;             // particle-filter steps replayed by GARP
  long groups_arrived = 0;          // arriving tau-groups
  long individual_arrived = 0;      // arriving individual OOSMs
  long groups_admitted = 0;         // tau-groups passing the gamma threshold
  long individual_admitted = 0;     // their individual OOSMs
  long individual_garp = 0;         // individual OOSMs handed to GARP
  long weight_underflows = 0;       // sir_step uniform-weight resets
  long sepf_degeneracies = 0;       // all-zero-weight SEPF reweightings
};

struct FilterContext {
  const model::StateModel* state_model = nullptr;
  const std::vector<model::SensorModel>* sensors = nullptr;
  select::SelectionConfig selection;
  int n_particles = 0;
  int first_meas_time = 1;
};

struct FilterState {
  pf::ParticleSet particles;
  WindowStore window;
  Rng rng;
  FilterStats stats;
  int time = 0;

  FilterState(int ell, int n_sensors) : window(ell, n_sensors) {}
  Vector estimate() const { return particles.states * particles.weights; }
};

// Draws the initial particles from the prior and stores its summary as the
// step-0 slot.
FilterState init_filter(const FilterContext& ctx, const pf::GaussianSummary& prior,
                        std::uint64_t seed);

// OOSMs arriving at the same step, grouped by origin time.
struct TauGroup {
  int tau = 0;
  std::uint32_t combo = 0;
  std::vector<OosmRecord> records;  // sorted by sensor id
};

std::vector<TauGroup> group_by_tau(const std::vector<OosmRecord>& batch);

// One filtering step: SIR on the undelayed measurements, summary saved into
// the window, then the strategy's OOSM processing on the batch; the window
// slides as part of the next push.
void generic_step(FilterState& state, const FilterContext& ctx,
                  const std::vector<StoredMeasurement>& undelayed,
                  const std::vector<OosmRecord>& batch, Strategy strategy);

// Rerun from the stored Gaussian at min(tau)-1 through the current step,
// replaying all stored measurements (the batch is incorporated first).
void process_garp(FilterState& state, const FilterContext& ctx,
                  const std::vector<OosmRecord>& batch);

// Precomputed affine conditioning of the smoothed step tau on the current
// particle: mean(tau | xi) = base + gain * xi, covariance shared. The
// smoother runs once; each particle costs one matrix-vector product.
struct OosmConditional {
  Vector base;          // mu~_tau - gain * mu_k
  Matrix gain;          // C_tau R_k^{-1}
  Matrix cond_cov;      // Sigma_tau, shared by all particles
  Matrix stacked_jac;   // H rows for the group's sensors
  Vector stacked_value; // z
  Matrix innov_cov;     // H Sigma H^T + blockdiag(Q)
  Matrix innov_cov_inv;
  double log_norm = 0.0;
  std::vector<const model::SensorModel*> group_sensors;

  double log_likelihood(const Vector& particle) const;
};

// `current` is the stored filtered summary (mu_k, R_k) of the newest step.
OosmConditional make_conditional(const pf::GaussianSummary& current,
                                 const smooth::SmoothedWindow& sw, int tau,
                                 const std::vector<OosmRecord>& records,
                                 const std::vector<model::SensorModel>& sensors);

// Per-particle log-likelihoods of one tau-group given each current particle.
Vector particle_conditioned_likelihoods(const WindowStore& window,
                                        const smooth::SmoothedWindow& sw,
                                        const pf::ParticleSet& ps, int tau,
                                        const std::vector<OosmRecord>& records,
                                        const std::vector<model::SensorModel>& sensors);

enum class SepfOutcome { kOk, kDegenerate };

// Multiplies the weights by one tau-group's conditioned likelihoods and
// renormalizes; particle locations never change. kDegenerate leaves the
// weights restored to their previous values.
SepfOutcome apply_sepf_group(FilterState& state, const smooth::SmoothedWindow& sw,
                             const TauGroup& group, const std::vector<model::SensorModel>& sensors);

// SEPF-EKS over a whole batch, groups in ascending tau order. Degenerate
// groups are reverted, counted and skipped.
void process_sepf_eks(FilterState& state, const FilterContext& ctx,
                      const smooth::SmoothedWindow& sw, const std::vector<TauGroup>& groups);

// The selective strategy: smooth, threshold, reweight admitted groups, and
// escalate the whole batch to GARP when the ESS ratio collapses below nu.
void process_selective(FilterState& state, const FilterContext& ctx,
                       const std::vector<OosmRecord>& batch);

}  // namespace dtpf::oosm
