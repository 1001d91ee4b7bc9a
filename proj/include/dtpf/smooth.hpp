#pragma once

#include <vector>

#include "dtpf/model.hpp"
#include "dtpf/window.hpp"

namespace dtpf::smooth {

using mat::Matrix;
using mat::Vector;

struct SmoothedStep {
  int time = 0;
  Vector mean;             // smoothed mean
  Matrix cov;              // smoothed covariance, symmetric PSD
  Matrix transition_jac;   // Jacobian of the step time -> time+1 transition,
                           // evaluated at the stored filtered mean
  Matrix product;          // accumulated transition product from `time` to k
  Matrix cross;            // cov(X_time, X_k) via the smoother gains
  std::vector<Matrix> sensor_jac;  // measurement Jacobians at the smoothed
                                   // mean, one per scenario sensor
};

// Backward smoothing pass over [k - ell, k] (clipped to the slots present).
struct SmoothedWindow {
  int current_time = 0;             // k
  std::vector<SmoothedStep> steps;  // oldest first, newest == current_time

  bool has(int tau) const {
    return !steps.empty() && tau >= steps.front().time && tau <= steps.back().time;
  }
  const SmoothedStep& at_time(int tau) const;
};

// Rauch-Tung-Striebel backward recursion over the stored filtered summaries,
// initialized at the newest slot. One sweep, no re-iteration; transition
// Jacobians are taken at the stored filtered means, measurement Jacobians at
// the smoothed means.
SmoothedWindow rts_smooth(const oosm::WindowStore& window, const model::StateModel& model,
                          const std::vector<model::SensorModel>& sensors);

// H R~ H^T + Q for a sensor at step tau.
Matrix meas_covariance(const SmoothedWindow& sw, int tau, const model::SensorModel& sensor);

// F_{k,tau} R~ H^T: cross-covariance between the current state and a
// (hypothetical) measurement at step tau.
Matrix cross_covariance(const SmoothedWindow& sw, int tau, const model::SensorModel& sensor);

}  // namespace dtpf::smooth
