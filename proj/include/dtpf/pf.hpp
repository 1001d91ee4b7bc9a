#pragma once

#include <vector>

#include "dtpf/mat.hpp"
#include "dtpf/model.hpp"
#include "dtpf/rng.hpp"

namespace dtpf::pf {

using mat::Matrix;
using mat::Vector;

// Weighted samples of the filtering posterior, one particle per column.
struct ParticleSet {
  Matrix states;   // state_dim x N
  Vector weights;  // N, nonnegative, sums to 1
  int size() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(states.rows()); }
};

struct GaussianSummary {
  Vector mean;
  Matrix cov;  // symmetric PSD
};

struct Measurement {
  const model::SensorModel* sensor = nullptr;
  Vector value;
};

struct StepFlags {
  bool weight_underflow = false;  // weights reset to uniform this step
};

// One SIR step: propagate through the transition with process-noise draws,
// weight by the Gaussian likelihood of every measurement (innovations wrap
// on angular sensors), normalize, systematic-resample. Weights accumulate in
// the log domain with max-subtraction; a total underflow resets the weights
// to uniform and flags the step.
StepFlags sir_step(ParticleSet& ps, const std::vector<Measurement>& meas,
                   const model::StateModel& model, Rng& rng);

// 1 / sum w_i^2 for normalized weights.
double effective_sample_size(const ParticleSet& ps);

// Weighted mean and covariance of the particle set, covariance symmetrized.
GaussianSummary save_gauss(const ParticleSet& ps);

// n equally weighted draws from N(mean, cov) via a PSD-safe symmetric factor.
ParticleSet sample_gaussian(const GaussianSummary& g, int n, Rng& rng);

// Classic systematic resampling; leaves weights uniform.
void systematic_resample(ParticleSet& ps, Rng& rng);

// Replaces weights with normalize(exp(logw - max logw)); returns false and
// resets to uniform when the total is zero or not finite.
bool set_weights_from_log(ParticleSet& ps, const Vector& logw);

}  // namespace dtpf::pf
