#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dtpf/oosm.hpp"

namespace dtpf::sim {

using mat::Matrix;
using mat::Vector;

struct SensorSpec {
  double x = 0.0;
  double y = 0.0;
  double sigma = 0.05;  // bearing noise standard deviation, radians
};

// Every scenario constant in one place. Defaults reproduce the benchmark
// scenario: three bearing sensors tracking a clockwise coordinated turn.
struct ScenarioConfig {
  int duration_steps = 40;
  double sampling_period = 1.0;  // seconds

  double turn_radius_m = 500.0;
  double speed_kmh = 200.0;
  double start_x = -500.0;
  double start_y = 500.0;

  Vector process_noise_diag;  // default [30^2, 30^2, 10^2, 10^2, 0.1^2]
  std::vector<SensorSpec> sensors;

  double p_osm = 0.7;
  int ell = 5;
  bool always_deliver_undelayed = false;  // sensitivity mode: d = 0 never dropped

  Vector prior_mean;      // default zeros
  Vector prior_cov_diag;  // default [1000^2, 1000^2, 30^2, 30^2, 0.1^2]

  int n_particles = 2000;
  int mc_runs = 200;
  std::uint64_t seed = 1;

  double c_ave = 0.6;
  double nu = 1.0 / 40.0;

  double speed_mps() const { return speed_kmh / 3.6; }
  // Clockwise turn is negative under the coordinated-turn sign convention.
  double turn_rate() const { return -speed_mps() / turn_radius_m; }

  void validate() const;
  static ScenarioConfig defaults();
  static ScenarioConfig from_json_file(const std::string& path);
  static ScenarioConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Per arrival step: the undelayed set Y_k and the OOSM batch Z_k, plus the
// full per-origin-step measurement list for the no-delay reference filter.
struct MeasurementStream {
  int duration = 0;
  std::vector<std::vector<oosm::StoredMeasurement>> undelayed;  // index = step
  std::vector<std::vector<oosm::OosmRecord>> batches;           // index = arrival step
  std::vector<std::vector<oosm::StoredMeasurement>> generated;  // index = origin step

  long n_generated = 0;
  long n_delivered = 0;
  long n_dropped = 0;    // lost in the channel
  long n_truncated = 0;  // would arrive past the horizon
};

// Deterministic circular-arc ground truth, states 0..duration.
std::vector<Vector> generate_truth(const ScenarioConfig& cfg);

// Bearings with additive Gaussian noise pushed through the lossy delaying
// channel: dropped with probability 1-p_osm, otherwise delayed by
// d ~ Uniform{0..ell} (d = 0 lands in the undelayed set).
MeasurementStream generate_measurements(const std::vector<Vector>& truth,
                                        const ScenarioConfig& cfg, Rng& rng);

std::vector<model::SensorModel> make_sensors(const ScenarioConfig& cfg);
model::StateModel make_state_model(const ScenarioConfig& cfg);
pf::GaussianSummary make_prior(const ScenarioConfig& cfg);
select::SelectionConfig make_selection(const ScenarioConfig& cfg);

}  // namespace dtpf::sim
