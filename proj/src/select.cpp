#include "dtpf/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dtpf::select {

void SelectionConfig::validate() const {
  if (!(c_ave >= 0.0)) throw std::invalid_argument("SelectionConfig: c_ave must be >= 0");
  // nu = 0 disables the degeneracy escalation (the always-SEPF limit).
  if (!(nu >= 0.0) || !(nu <= 1.0)) throw std::invalid_argument("SelectionConfig: nu must be in [0, 1]");
  if (!(p_osm >= 0.0) || !(p_osm <= 1.0))
    throw std::invalid_argument("SelectionConfig: p_osm must be a probability");
  if (ell < 0) throw std::invalid_argument("SelectionConfig: ell must be >= 0");
  if (!(unit_cost > 0.0)) throw std::invalid_argument("SelectionConfig: unit_cost must be > 0");
}

double arrival_prob_single(int tau, int k, int sensor_id, const oosm::WindowStore& window,
                           const SelectionConfig& cfg) {
  const int delay = k - tau;
  if (delay < 1 || delay > cfg.ell)
    throw std::out_of_range("arrival_prob_single: tau outside [k-ell, k-1]");
  if (window.has(tau) && window.slot(tau).arrived.at(static_cast<std::size_t>(sensor_id)))
    return 0.0;
  return cfg.p_osm / static_cast<double>(cfg.ell + 1 - delay);
}

double arrival_prob_combo(int tau, int k, std::uint32_t combo, int n_sensors,
                          const oosm::WindowStore& window, const SelectionConfig& cfg) {
  double p = 1.0;
  for (int s = 0; s < n_sensors; ++s) {
    const double ps = arrival_prob_single(tau, k, s, window, cfg);
    p *= (combo >> s) & 1u ? ps : 1.0 - ps;
  }
  return p;
}

double combo_utility(const smooth::SmoothedWindow& sw, int tau, std::uint32_t combo,
                     const std::vector<model::SensorModel>& sensors) {
  if (combo == 0) throw std::invalid_argument("combo_utility: empty sensor combination");
  const smooth::SmoothedStep& st = sw.at_time(tau);

  int total = 0;
  for (std::size_t s = 0; s < sensors.size(); ++s)
    if ((combo >> s) & 1u) total += sensors[s].meas_dim;

  const int d = static_cast<int>(st.mean.size());
  Matrix H(total, d);
  Matrix Q = Matrix::Zero(total, total);
  int row = 0;
  for (std::size_t s = 0; s < sensors.size(); ++s) {
    if (!((combo >> s) & 1u)) continue;
    const int m = sensors[s].meas_dim;
    H.middleRows(row, m) = st.sensor_jac.at(s);
    Q.block(row, row, m, m) = sensors[s].meas_noise;
    row += m;
  }

  const Matrix meas_cov = mat::symmetrized(H * st.cov * H.transpose() + Q);
  const Matrix cross = st.product * st.cov * H.transpose();  // R_{X_k Y}
  return (cross * mat::spd_solve(meas_cov, cross.transpose())).trace();
}

GammaResult calc_gamma(const std::vector<CandidateUtility>& candidates, double c_ave) {
  GammaResult out;
  out.gamma = std::numeric_limits<double>::infinity();
  if (candidates.empty()) return out;

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = candidates[a];
    const auto& cb = candidates[b];
    if (ca.diminished != cb.diminished) return ca.diminished > cb.diminished;
    if (ca.tau != cb.tau) return ca.tau < cb.tau;
    return ca.combo < cb.combo;
  });

  // Scan distinct diminished-utility values in descending order; the
  // threshold admits every candidate at or above it, so feasibility is
  // checked at value-group boundaries.
  double psi = 0.0;
  double gamma = std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double value = candidates[order[pos]].diminished;
    std::size_t end = pos;
    double group = 0.0;
    while (end < order.size() && candidates[order[end]].diminished == value) {
      const auto& c = candidates[order[end]];
      group += c.arrival_prob * c.cost;
      ++end;
    }
    if (psi + group > c_ave) break;
    psi += group;
    gamma = value;
    pos = end;
  }
  out.gamma = gamma;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].diminished >= out.gamma) out.admitted.push_back(i);
  return out;
}

std::vector<CandidateUtility> enumerate_candidates(const smooth::SmoothedWindow& sw,
                                                   const oosm::WindowStore& window,
                                                   const std::vector<model::SensorModel>& sensors,
                                                   const SelectionConfig& cfg,
                                                   int first_meas_time) {
  const int k = sw.current_time;
  const int n_sensors = static_cast<int>(sensors.size());
  std::vector<CandidateUtility> out;
  const int lo = std::max({k - cfg.ell, first_meas_time,
                           sw.steps.empty() ? k : sw.steps.front().time});
  for (int tau = lo; tau <= k - 1; ++tau) {
    for (std::uint32_t combo = 1; combo < (1u << n_sensors); ++combo) {
      CandidateUtility c;
      c.tau = tau;
      c.combo = combo;
      c.utility = combo_utility(sw, tau, combo, sensors);
      c.arrival_prob = arrival_prob_combo(tau, k, combo, n_sensors, window, cfg);
      c.cost = cfg.unit_cost;
      c.diminished = c.utility / c.cost;
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace dtpf::select
