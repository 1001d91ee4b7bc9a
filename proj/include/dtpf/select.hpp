#pragma once

#include <cstdint>
#include <vector>

#include "dtpf/smooth.hpp"
#include "dtpf/window.hpp"

namespace dtpf::select {

using mat::Matrix;
using mat::Vector;

struct SelectionConfig {
  double c_ave = 0.6;      // average SEPF-EKS sweeps allowed per step
  double nu = 1.0 / 40.0;  // ESS-ratio degeneracy threshold
  double p_osm = 0.7;      // delivery probability
  int ell = 5;             // maximum delay, steps
  double unit_cost = 1.0;  // cost of one SEPF-EKS sweep
  void validate() const;
};

// One hypothetical OOSM group: sensors `combo` (bitmask) at step tau.
struct CandidateUtility {
  int tau = 0;
  std::uint32_t combo = 0;
  double utility = 0.0;       // R, trace of the predicted MSE reduction
  double arrival_prob = 0.0;  // p
  double cost = 1.0;          // C
  double diminished = 0.0;    // R / C
};

// p_osm / (ell + 1 - (k - tau)) for a still-pending measurement, 0 once it
// has arrived. Requires k - ell <= tau < k.
double arrival_prob_single(int tau, int k, int sensor_id, const oosm::WindowStore& window,
                           const SelectionConfig& cfg);

// Product of in-combo arrival probabilities and out-of-combo complements.
double arrival_prob_combo(int tau, int k, std::uint32_t combo, int n_sensors,
                          const oosm::WindowStore& window, const SelectionConfig& cfg);

// tr( R_XY R_YY^{-1} R_YX ) for the stacked sensor combination, with the
// full (non-diagonal) R_YY = H R~ H^T + blockdiag(Q).
double combo_utility(const smooth::SmoothedWindow& sw, int tau, std::uint32_t combo,
                     const std::vector<model::SensorModel>& sensors);

struct GammaResult {
  double gamma = 0.0;                  // +inf admits nothing
  std::vector<std::size_t> admitted;   // indices of candidates with diminished >= gamma
};

// Smallest threshold gamma such that sum of p*C over every candidate with
// diminished utility >= gamma stays within c_ave. Candidates tied at the
// threshold all count toward the constraint. Ties in the ordering break by
// (diminished desc, tau asc, combo asc).
GammaResult calc_gamma(const std::vector<CandidateUtility>& candidates, double c_ave);

// All (tau, nonempty combo) candidates over the current window, recomputed
// from the smoothed window. `first_meas_time` is the first step at which
// sensors were active.
std::vector<CandidateUtility> enumerate_candidates(const smooth::SmoothedWindow& sw,
                                                   const oosm::WindowStore& window,
                                                   const std::vector<model::SensorModel>& sensors,
                                                   const SelectionConfig& cfg,
                                                   int first_meas_time = 1);

}  // namespace dtpf::select
