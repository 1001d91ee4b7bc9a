#include "dtpf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

namespace dtpf::bench {

namespace {

constexpr std::uint64_t kStreamSalt = 0x5745415448455221ull;
constexpr std::uint64_t kFilterSalt = 0x46494c5445525221ull;

oosm::Strategy strategy_for(FilterKind kind) {
  switch (kind) {
    case FilterKind::kPfAll:
    case FilterKind::kPfMis:
      return oosm::Strategy::kDiscard;
    case FilterKind::kSepfEks:
      return oosm::Strategy::kSepfEks;
    case FilterKind::kPfGs:
      return oosm::Strategy::kGarp;
    case FilterKind::kPfSel:
      return oosm::Strategy::kSelective;
  }
  throw std::logic_error("strategy_for: unknown filter");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string filter_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::kPfAll: return "PFall";
    case FilterKind::kPfMis: return "PFmis";
    case FilterKind::kSepfEks: return "SEPF-EKS";
    case FilterKind::kPfGs: return "PF-GS";
    case FilterKind::kPfSel: return "PF-SEL";
  }
  throw std::logic_error("filter_name: unknown filter");
}

std::optional<FilterKind> parse_filter(const std::string& name) {
  for (FilterKind k : all_filters())
    if (filter_name(k) == name) return k;
  return std::nullopt;
}

std::vector<FilterKind> all_filters() {
  return {FilterKind::kPfAll, FilterKind::kPfMis, FilterKind::kSepfEks, FilterKind::kPfGs,
          FilterKind::kPfSel};
}

double FilterResult::admitted_frac_groups() const {
  return stats.groups_arrived > 0
             ? static_cast<double>(stats.groups_admitted) / static_cast<double>(stats.groups_arrived)
             : 0.0;
}

double FilterResult::admitted_frac_individual() const {
  return stats.individual_arrived > 0 ? static_cast<double>(stats.individual_admitted) /
                                            static_cast<double>(stats.individual_arrived)
                                      : 0.0;
}

double FilterResult::garp_frac() const {
  return stats.individual_arrived > 0 ? static_cast<double>(stats.individual_garp) /
                                            static_cast<double>(stats.individual_arrived)
                                      : 0.0;
}

double FilterResult::sweeps_per_step() const {
  return stats.steps > 0 ? static_cast<double>(stats.sepf_sweeps) / static_cast<double>(stats.steps)
                         : 0.0;
}

std::vector<double> rms_curve(const std::vector<std::vector<Eigen::Vector2d>>& estimates,
                              const std::vector<Eigen::Vector2d>& truth) {
  if (estimates.empty()) throw std::invalid_argument("rms_curve: need at least one run");
  const std::size_t T = truth.size();
  for (const auto& run : estimates)
    if (run.size() != T) throw std::invalid_argument("rms_curve: run length != truth length");
  std::vector<double> rms(T, 0.0);
  for (std::size_t k = 0; k < T; ++k) {
    double acc = 0.0;
    for (const auto& run : estimates) acc += (run[k] - truth[k]).squaredNorm();
    rms[k] = std::sqrt(acc / static_cast<double>(estimates.size()));
  }
  return rms;
}

RunReport run_benchmark(const sim::ScenarioConfig& cfg, const std::vector<FilterKind>& filters,
                        int n_threads) {
  cfg.validate();
  const int T = cfg.duration_steps;
  const int M = cfg.mc_runs;
  const auto sensors = sim::make_sensors(cfg);
  const auto state_model = sim::make_state_model(cfg);
  const auto prior = sim::make_prior(cfg);
  const auto truth = sim::generate_truth(cfg);

  oosm::FilterContext ctx;
  ctx.state_model = &state_model;
  ctx.sensors = &sensors;
  ctx.selection = sim::make_selection(cfg);
  ctx.n_particles = cfg.n_particles;
  ctx.first_meas_time = 1;

  RunReport report;
  report.cfg = cfg;
  report.estimates.assign(filters.size(),
                          std::vector<std::vector<Eigen::Vector2d>>(
                              static_cast<std::size_t>(M),
                              std::vector<Eigen::Vector2d>(static_cast<std::size_t>(T))));
  std::vector<std::vector<oosm::FilterStats>> stats(
      filters.size(), std::vector<oosm::FilterStats>(static_cast<std::size_t>(M)));
  std::vector<std::vector<double>> walls(filters.size(),
                                         std::vector<double>(static_cast<std::size_t>(M), 0.0));

  auto run_one = [&](int r) {
    Rng stream_rng(derive_seed(cfg.seed, kStreamSalt, static_cast<std::uint64_t>(r)));
    const auto stream = sim::generate_measurements(truth, cfg, stream_rng);
    const std::uint64_t filter_seed = derive_seed(cfg.seed, kFilterSalt, static_cast<std::uint64_t>(r));

    for (std::size_t fi = 0; fi < filters.size(); ++fi) {
      const FilterKind kind = filters[fi];
      const auto t0 = std::chrono::steady_clock::now();
      oosm::FilterState state = oosm::init_filter(ctx, prior, filter_seed);
      const oosm::Strategy strategy = strategy_for(kind);
      static const std::vector<oosm::OosmRecord> kNoBatch;
      for (int k = 1; k <= T; ++k) {
        const auto& undelayed = kind == FilterKind::kPfAll
                                    ? stream.generated[static_cast<std::size_t>(k)]
                                    : stream.undelayed[static_cast<std::size_t>(k)];
        const auto& batch = kind == FilterKind::kPfAll ? kNoBatch
                                                       : stream.batches[static_cast<std::size_t>(k)];
        oosm::generic_step(state, ctx, undelayed, batch, strategy);
        const Vector est = state.estimate();
        report.estimates[fi][static_cast<std::size_t>(r)][static_cast<std::size_t>(k - 1)] =
            Eigen::Vector2d(est[0], est[1]);
      }
      stats[fi][static_cast<std::size_t>(r)] = state.stats;
      walls[fi][static_cast<std::size_t>(r)] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  const int hw = n_threads > 0 ? n_threads
                               : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (hw <= 1 || M == 1) {
    for (int r = 0; r < M; ++r) run_one(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(hw, M); ++t)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < M; r = next.fetch_add(1)) run_one(r);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<Eigen::Vector2d> truth_pos(static_cast<std::size_t>(T));
  for (int k = 1; k <= T; ++k)
    truth_pos[static_cast<std::size_t>(k - 1)] =
        Eigen::Vector2d(truth[static_cast<std::size_t>(k)][0], truth[static_cast<std::size_t>(k)][1]);

  for (std::size_t fi = 0; fi < filters.size(); ++fi) {
    FilterResult res;
    res.kind = filters[fi];
    const auto curve = rms_curve(report.estimates[fi], truth_pos);
    res.rms.assign(static_cast<std::size_t>(T) + 1, 0.0);
    for (int k = 1; k <= T; ++k) res.rms[static_cast<std::size_t>(k)] = curve[static_cast<std::size_t>(k - 1)];
    for (int r = 0; r < M; ++r) {
      const auto& s = stats[fi][static_cast<std::size_t>(r)];
      res.stats.steps += s.steps;
      res.stats.sepf_sweeps += s.sepf_sweeps;
      res.stats.garp_invocations += s.garp_invocations;
      res.stats.garp_sweeps += s.garp_sweeps;
      res.stats.groups_arrived += s.groups_arrived;
      res.stats.individual_arrived += s.individual_arrived;
      res.stats.groups_admitted += s.groups_admitted;
      res.stats.individual_admitted += s.individual_admitted;
      res.stats.individual_garp += s.individual_garp;
      res.stats.weight_underflows += s.weight_underflows;
      res.stats.sepf_degeneracies += s.sepf_degeneracies;
      res.wall_s += walls[fi][static_cast<std::size_t>(r)];
    }
    report.filters.push_back(std::move(res));
  }
  return report;
}

std::vector<double> default_c_ave_list() {
  return {0.0, 0.1, 0.2, 0.4, 0.5, 0.6, 0.78, 1.0, 1.3, 2.0};
}

std::vector<SweepRow> complexity_sweep(const sim::ScenarioConfig& cfg,
                                       const std::vector<double>& c_ave_list,
                                       const std::vector<int>& report_steps, int n_threads) {
  std::vector<SweepRow> rows;
  for (double c_ave : c_ave_list) {
    sim::ScenarioConfig one = cfg;
    one.c_ave = c_ave;
    const RunReport report = run_benchmark(one, {FilterKind::kPfSel}, n_threads);
    const FilterResult& res = report.filters.front();
    for (int step : report_steps) {
      if (step < 1 || step > cfg.duration_steps)
        throw std::invalid_argument("complexity_sweep: report step outside the horizon");
      rows.push_back({c_ave, step, res.rms[static_cast<std::size_t>(step)], res.sweeps_per_step()});
    }
  }
  return rows;
}

std::vector<Theorem1Row> theorem1_study(const Theorem1Options& opt) {
  const int d = opt.state_dim;
  const int K = opt.n_sensors;
  const int L = opt.window;
  Rng rng(derive_seed(opt.seed, 0x7468656f72656d31ull));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  auto random_matrix = [&](int r, int c, double scale) {
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = scale * unit(rng);
    return m;
  };

  std::vector<Theorem1Row> rows;
  for (int sys = 0; sys < opt.n_systems; ++sys) {
    // Per window step: transitions with spectral norm 0.9 (A3), smoothed
    // covariances with eigenvalues in [1e-4, 1e-2] (A1), bounded bearing-like
    // rows (A2).
    std::vector<Matrix> trans(static_cast<std::size_t>(L));
    for (auto& F : trans) {
      const Eigen::HouseholderQR<Matrix> qr(random_matrix(d, d, 1.0));
      Matrix Q = qr.householderQ();
      F = 0.9 * Q;
    }
    std::vector<Matrix> cov(static_cast<std::size_t>(L));
    for (auto& R : cov) {
      const Eigen::HouseholderQR<Matrix> qr(random_matrix(d, d, 1.0));
      Matrix Q = qr.householderQ();
      Vector lam(d);
      for (int i = 0; i < d; ++i) lam[i] = 1e-4 + (1e-2 - 1e-4) * uni(rng);
      R = mat::symmetrized(Q * lam.asDiagonal() * Q.transpose());
    }
    std::vector<std::vector<Matrix>> H(static_cast<std::size_t>(L));
    for (auto& per_step : H) {
      per_step.resize(static_cast<std::size_t>(K));
      for (auto& h : per_step) h = random_matrix(1, d, 0.5);
    }

    // Products F_{m,n} over window offsets (0 = newest delayed step, which is
    // one transition away from the current step k).
    // Index i in [0, L): step tau_i = k - L + i; F list trans[i] maps
    // tau_i -> tau_{i+1}, trans[L-1] maps tau_{L-1} -> k.
    auto product_from = [&](int i_from, int i_to_exclusive) {
      Matrix P = Matrix::Identity(d, d);
      for (int j = i_from; j < i_to_exclusive; ++j) P = trans[static_cast<std::size_t>(j)] * P;
      return P;
    };

    const int n_blocks = L * K;
    auto block_index = [&](int step, int sensor) { return step * K + sensor; };
    // Cross-covariance to the current state per (step, sensor).
    std::vector<Matrix> cross(static_cast<std::size_t>(n_blocks));
    for (int i = 0; i < L; ++i) {
      const Matrix Fki = product_from(i, L);  // F_{k, tau_i}
      for (int s = 0; s < K; ++s)
        cross[static_cast<std::size_t>(block_index(i, s))] =
            Fki * cov[static_cast<std::size_t>(i)] *
            H[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)].transpose();
    }

    // sigma-independent pieces of R_ZZ.
    Matrix core(n_blocks, n_blocks);
    for (int i = 0; i < L; ++i) {
      for (int s = 0; s < K; ++s) {
        for (int j = 0; j < L; ++j) {
          for (int t = 0; t < K; ++t) {
            const Matrix& Hi = H[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
            const Matrix& Hj = H[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)];
            Matrix block;
            if (i == j) {
              block = Hi * cov[static_cast<std::size_t>(i)] * Hj.transpose();
            } else if (i > j) {
              block = Hi * product_from(j, i) * cov[static_cast<std::size_t>(j)] * Hj.transpose();
            } else {
              block = Hi * cov[static_cast<std::size_t>(i)] * product_from(i, j).transpose() *
                      Hj.transpose();
            }
            core(block_index(i, s), block_index(j, t)) = block(0, 0);
          }
        }
      }
    }
    core = mat::symmetrized(core);

    Matrix cross_mat(d, n_blocks);
    for (int b = 0; b < n_blocks; ++b) cross_mat.col(b) = cross[static_cast<std::size_t>(b)];

    // Lemma bound on rho(B - R_ZZ): off-diagonal blocks only (1x1 here).
    std::vector<mat::Block> blocks;
    for (int i = 0; i < n_blocks; ++i)
      for (int j = 0; j < n_blocks; ++j) {
        const double v = i == j ? 0.0 : -core(i, j);
        blocks.push_back({Matrix::Constant(1, 1, v), i, j});
      }
    const double lemma_bound = mat::spectral_radius_bound_blocks(blocks);
    const double rho_cross =
        mat::symmetric_spectral_radius(mat::symmetrized(cross_mat * cross_mat.transpose()));

    for (double sigma : opt.sigmas) {
      Matrix R_zz = core;
      R_zz.diagonal().array() += sigma * sigma;

      const double exact = (cross_mat * mat::spd_solve(R_zz, cross_mat.transpose())).trace();
      Matrix B = Matrix::Zero(n_blocks, n_blocks);
      B.diagonal() = R_zz.diagonal();
      const double blockdiag = (cross_mat * mat::spd_solve(B, cross_mat.transpose())).trace();

      Theorem1Row row;
      row.system = sys;
      row.sigma = sigma;
      row.exact = exact;
      row.blockdiag = blockdiag;
      row.abs_diff = std::abs(exact - blockdiag);
      const double lam_min = sigma * sigma;  // min eigenvalue of Q = sigma^2 I
      row.bound_valid = lam_min > lemma_bound;
      row.bound = row.bound_valid ? static_cast<double>(K * L) * rho_cross * lemma_bound /
                                        ((lam_min - lemma_bound) * lam_min)
                                  : std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
    }
  }
  return rows;
}

void write_rms_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "step,filter,rms_m\n";
  for (const auto& res : report.filters)
    for (std::size_t k = 1; k < res.rms.size(); ++k)
      out << k << ',' << filter_name(res.kind) << ',' << format_double(res.rms[k]) << '\n';
}

void write_stats_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "filter,admitted_frac_groups,admitted_frac_individual,garp_frac,sweeps_per_step,wall_s\n";
  for (const auto& res : report.filters)
    out << filter_name(res.kind) << ',' << format_double(res.admitted_frac_groups()) << ','
        << format_double(res.admitted_frac_individual()) << ',' << format_double(res.garp_frac())
        << ',' << format_double(res.sweeps_per_step()) << ',' << format_double(res.wall_s) << '\n';
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "c_ave,step,rms_m,sweeps_per_step\n";
  for (const auto& r : rows)
    out << format_double(r.c_ave) << ',' << r.step << ',' << format_double(r.rms_m) << ','
        << format_double(r.sweeps_per_step) << '\n';
}

void write_theorem1_csv(const std::string& path, const std::vector<Theorem1Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "sigma,exact,blockdiag,abs_diff,bound\n";
  for (const auto& r : rows)
    out << format_double(r.sigma) << ',' << format_double(r.exact) << ','
        << format_double(r.blockdiag) << ',' << format_double(r.abs_diff) << ','
        << format_double(r.bound) << '\n';
}

}  // namespace dtpf::bench
