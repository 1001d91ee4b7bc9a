#include "dtpf/sim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dtpf::sim {

namespace {

Vector default_process_diag() {
  Vector v(5);
  v << 30.0 * 30.0, 30.0 * 30.0, 10.0 * 10.0, 10.0 * 10.0, 0.1 * 0.1;
  return v;
}

Vector default_prior_diag() {
  Vector v(5);
  v << 1000.0 * 1000.0, 1000.0 * 1000.0, 30.0 * 30.0, 30.0 * 30.0, 0.1 * 0.1;
  return v;
}

Vector to_vector(const nlohmann::json& j) {
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j.at(i).get<double>();
  return v;
}

nlohmann::json from_vector(const Vector& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

}  // namespace

ScenarioConfig ScenarioConfig::defaults() {
  ScenarioConfig cfg;
  cfg.process_noise_diag = default_process_diag();
  cfg.prior_mean = Vector::Zero(5);
  cfg.prior_cov_diag = default_prior_diag();
  cfg.sensors = {{-200.0, 0.0, 0.05}, {200.0, 0.0, 0.05}, {-750.0, 750.0, 0.05}};
  return cfg;
}

void ScenarioConfig::validate() const {
  if (duration_steps < 1) throw std::invalid_argument("ScenarioConfig: duration must be >= 1");
  if (!(sampling_period > 0.0)) throw std::invalid_argument("ScenarioConfig: bad sampling period");
  if (!(turn_radius_m > 0.0)) throw std::invalid_argument("ScenarioConfig: bad turn radius");
  if (ell < 0) throw std::invalid_argument("ScenarioConfig: ell must be >= 0");
  if (!(p_osm >= 0.0 && p_osm <= 1.0)) throw std::invalid_argument("ScenarioConfig: bad p_osm");
  if (process_noise_diag.size() != 5 || prior_cov_diag.size() != 5 || prior_mean.size() != 5)
    throw std::invalid_argument("ScenarioConfig: state vectors must be 5-dimensional");
  if ((process_noise_diag.array() <= 0.0).any() || (prior_cov_diag.array() <= 0.0).any())
    throw std::invalid_argument("ScenarioConfig: variances must be positive");
  if (sensors.empty()) throw std::invalid_argument("ScenarioConfig: need at least one sensor");
  for (const auto& s : sensors)
    if (!(s.sigma > 0.0)) throw std::invalid_argument("ScenarioConfig: sensor sigma must be positive");
  if (n_particles < 1) throw std::invalid_argument("ScenarioConfig: need at least one particle");
  if (mc_runs < 1) throw std::invalid_argument("ScenarioConfig: need at least one run");
  if (!(c_ave >= 0.0)) throw std::invalid_argument("ScenarioConfig: c_ave must be >= 0");
  if (!(nu >= 0.0 && nu <= 1.0)) throw std::invalid_argument("ScenarioConfig: nu must be in [0, 1]");
}

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ScenarioConfig cfg = defaults();
  if (j.contains("duration_steps")) cfg.duration_steps = j["duration_steps"].get<int>();
  if (j.contains("sampling_period")) cfg.sampling_period = j["sampling_period"].get<double>();
  if (j.contains("turn_radius_m")) cfg.turn_radius_m = j["turn_radius_m"].get<double>();
  if (j.contains("speed_kmh")) cfg.speed_kmh = j["speed_kmh"].get<double>();
  if (j.contains("start_pos")) {
    cfg.start_x = j["start_pos"].at(0).get<double>();
    cfg.start_y = j["start_pos"].at(1).get<double>();
  }
  if (j.contains("process_noise_diag")) cfg.process_noise_diag = to_vector(j["process_noise_diag"]);
  if (j.contains("sensors")) {
    cfg.sensors.clear();
    for (const auto& js : j["sensors"])
      cfg.sensors.push_back({js.at("x").get<double>(), js.at("y").get<double>(),
                             js.value("sigma", 0.05)});
  }
  if (j.contains("p_osm")) cfg.p_osm = j["p_osm"].get<double>();
  if (j.contains("ell")) cfg.ell = j["ell"].get<int>();
  if (j.contains("always_deliver_undelayed"))
    cfg.always_deliver_undelayed = j["always_deliver_undelayed"].get<bool>();
  if (j.contains("prior_mean")) cfg.prior_mean = to_vector(j["prior_mean"]);
  if (j.contains("prior_cov_diag")) cfg.prior_cov_diag = to_vector(j["prior_cov_diag"]);
  if (j.contains("n_particles")) cfg.n_particles = j["n_particles"].get<int>();
  if (j.contains("mc_runs")) cfg.mc_runs = j["mc_runs"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("c_ave")) cfg.c_ave = j["c_ave"].get<double>();
  if (j.contains("nu")) cfg.nu = j["nu"].get<double>();
  cfg.validate();
  return cfg;
}

ScenarioConfig ScenarioConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string ScenarioConfig::to_json_text() const {
  nlohmann::json j;
  j["duration_steps"] = duration_steps;
  j["sampling_period"] = sampling_period;
  j["turn_radius_m"] = turn_radius_m;
  j["speed_kmh"] = speed_kmh;
  j["start_pos"] = {start_x, start_y};
  j["process_noise_diag"] = from_vector(process_noise_diag);
  j["sensors"] = nlohmann::json::array();
  for (const auto& s : sensors) j["sensors"].push_back({{"x", s.x}, {"y", s.y}, {"sigma", s.sigma}});
  j["p_osm"] = p_osm;
  j["ell"] = ell;
  j["always_deliver_undelayed"] = always_deliver_undelayed;
  j["prior_mean"] = from_vector(prior_mean);
  j["prior_cov_diag"] = from_vector(prior_cov_diag);
  j["n_particles"] = n_particles;
  j["mc_runs"] = mc_runs;
  j["seed"] = seed;
  j["c_ave"] = c_ave;
  j["nu"] = nu;
  return j.dump(2);
}

std::vector<Vector> generate_truth(const ScenarioConfig& cfg) {
  Vector x(5);
  x << cfg.start_x, cfg.start_y, 0.0, cfg.speed_mps(), cfg.turn_rate();
  std::vector<Vector> truth;
  truth.reserve(static_cast<std::size_t>(cfg.duration_steps) + 1);
  truth.push_back(x);
  for (int k = 1; k <= cfg.duration_steps; ++k) {
    x = model::ct_transition(x, cfg.sampling_period).value;
    truth.push_back(x);
  }
  return truth;
}

MeasurementStream generate_measurements(const std::vector<Vector>& truth,
                                        const ScenarioConfig& cfg, Rng& rng) {
  const int T = cfg.duration_steps;
  MeasurementStream out;
  out.duration = T;
  out.undelayed.resize(static_cast<std::size_t>(T) + 1);
  out.batches.resize(static_cast<std::size_t>(T) + 1);
  out.generated.resize(static_cast<std::size_t>(T) + 1);

  const auto sensors = make_sensors(cfg);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int> delay(0, cfg.ell);

  for (int k = 1; k <= T; ++k) {
    for (std::size_t s = 0; s < sensors.size(); ++s) {
      const double bearing = model::bearing_measure(truth[static_cast<std::size_t>(k)], sensors[s]).value;
      const double noisy = bearing + cfg.sensors[s].sigma * unit(rng);
      const Vector value = Vector::Constant(1, noisy);
      out.n_generated += 1;
      out.generated[static_cast<std::size_t>(k)].push_back({static_cast<int>(s), value});

      int d;
      bool delivered;
      if (cfg.always_deliver_undelayed) {
        d = delay(rng);
        delivered = d == 0 || uni(rng) < cfg.p_osm;
      } else {
        delivered = uni(rng) < cfg.p_osm;
        d = delivered ? delay(rng) : 0;
      }
      if (!delivered) {
        out.n_dropped += 1;
        continue;
      }
      if (d == 0) {
        out.undelayed[static_cast<std::size_t>(k)].push_back({static_cast<int>(s), value});
        out.n_delivered += 1;
      } else if (k + d <= T) {
        out.batches[static_cast<std::size_t>(k + d)].push_back(
            {static_cast<int>(s), k, k + d, value});
        out.n_delivered += 1;
      } else {
        out.n_truncated += 1;
      }
    }
  }
  return out;
}

std::vector<model::SensorModel> make_sensors(const ScenarioConfig& cfg) {
  std::vector<model::SensorModel> out;
  out.reserve(cfg.sensors.size());
  for (std::size_t i = 0; i < cfg.sensors.size(); ++i)
    out.push_back(model::bearing_sensor(static_cast<int>(i), cfg.sensors[i].x, cfg.sensors[i].y,
                                        cfg.sensors[i].sigma));
  return out;
}

model::StateModel make_state_model(const ScenarioConfig& cfg) {
  return model::coordinated_turn_model(cfg.process_noise_diag.asDiagonal(), cfg.sampling_period);
}

pf::GaussianSummary make_prior(const ScenarioConfig& cfg) {
  return {cfg.prior_mean, Matrix(cfg.prior_cov_diag.asDiagonal())};
}

select::SelectionConfig make_selection(const ScenarioConfig& cfg) {
  select::SelectionConfig sel;
  sel.c_ave = cfg.c_ave;
  sel.nu = cfg.nu;
  sel.p_osm = cfg.p_osm;
  sel.ell = cfg.ell;
  sel.unit_cost = 1.0;
  return sel;
}

}  // namespace dtpf::sim
