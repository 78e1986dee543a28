#include "cbu/runner.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbu/embedding.hpp"
#include "cbu/recovery.hpp"

namespace cbu {

namespace {

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const ExperimentConfig& cfg,
            const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    char buf[160];
    std::snprintf(buf, sizeof buf, "# config_hash=%016" PRIx64 " version=%s mode=%s seed=%" PRIu64 "\n",
                  cfg.hash, kVersion, to_string(cfg.mode).c_str(), cfg.seed);
    out_ << buf;
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
    width_ = header.size();
  }

  void row(const std::vector<double>& values) {
    if (values.size() != width_) throw std::logic_error("csv row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << "\n";
  }

 private:
  std::ofstream out_;
  std::size_t width_ = 0;
};

void matrix_columns(std::vector<std::string>& h, const std::string& name, Index d) {
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      h.push_back("re_" + name + "_" + std::to_string(i) + std::to_string(j));
      h.push_back("im_" + name + "_" + std::to_string(i) + std::to_string(j));
    }
}

void matrix_values(std::vector<double>& v, const ComplexMatrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      v.push_back(m(i, j).real());
      v.push_back(m(i, j).imag());
    }
}

std::vector<double> grid_of(const ExperimentConfig& cfg) { return TimeGrid{cfg.t0, cfg.t1, cfg.dt}.times(); }

bool povm_complete(const CanonicalMasterEquation& me, const std::vector<double>& grid,
                   const Tolerances& tol) {
  return validate_canonical(me, grid).povm_ok(tol);
}

EnsembleOptions ensemble_options(const ExperimentConfig& cfg) {
  EnsembleOptions o;
  o.dt = cfg.dt;
  o.record_stride = cfg.record_stride;
  o.n_traj = cfg.n_traj;
  o.seed = cfg.seed;
  o.threads = cfg.threads;
  return o;
}

std::string write_density(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                          const DensitySeries& s, double time_offset = 0.0) {
  const Index d = s.states.front().rows();
  std::vector<std::string> h{"t"};
  matrix_columns(h, "rho", d);
  h.push_back("trace");
  h.push_back("min_eigenvalue");
  const auto path = dir / "density.csv";
  CsvWriter w(path, cfg, h);
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    std::vector<double> v{s.times[k] + time_offset};
    matrix_values(v, s.states[k]);
    v.push_back(s.states[k].trace().real());
    v.push_back(min_hermitian_eigenvalue(hermitize(s.states[k])));
    w.row(v);
  }
  return path.string();
}

std::string write_ensemble(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                           const EnsembleEstimate& e, double time_origin, double time_sign) {
  const Index d = e.rho_hat.front().rows();
  std::vector<std::string> h{"t"};
  matrix_columns(h, "rho_hat", d);
  matrix_columns(h, "rho_hat_se", d);
  matrix_columns(h, "rho_tilde_hat", d);
  matrix_columns(h, "rho_tilde_hat_se", d);
  for (const char* c : {"mu_mean", "mu_mean_se", "mu_sq_mean", "mu_sq_se", "max_abs_lambda", "log_scale"})
    h.push_back(c);
  const auto path = dir / "ensemble.csv";
  CsvWriter w(path, cfg, h);
  for (std::size_t k = 0; k < e.grid.size(); ++k) {
    std::vector<double> v{time_origin + time_sign * (e.grid[k] - e.grid.front())};
    matrix_values(v, e.rho_hat[k]);
    matrix_values(v, e.rho_hat_se[k]);
    matrix_values(v, e.rho_tilde_hat[k]);
    matrix_values(v, e.rho_tilde_hat_se[k]);
    for (double x : {e.mu_mean[k], e.mu_mean_se[k], e.mu_sq_mean[k], e.mu_sq_se[k], e.max_abs_lambda[k],
                     e.log_scale[k]})
      v.push_back(x);
    w.row(v);
  }
  return path.string();
}

std::string write_bound(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                        const VarianceBoundReport& r) {
  const auto path = dir / "bound.csv";
  CsvWriter w(path, cfg,
              {"t", "hs_distance_sq", "mu_sq_minus_one", "envelope", "combined_se", "violated"});
  for (const auto& row : r.rows)
    w.row({row.t, row.distance_sq, row.mu_sq_minus_one, row.envelope, row.combined_se,
           row.violated ? 1.0 : 0.0});
  return path.string();
}

std::string write_trajectories(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                               const PairedEquations& pair, const InitialStateSampler& sampler) {
  const Index d = pair.source.dim();
  std::vector<std::string> h{"t", "traj_id"};
  for (Index i = 0; i < d; ++i) {
    h.push_back("re_psi_" + std::to_string(i));
    h.push_back("im_psi_" + std::to_string(i));
  }
  h.push_back("mu");
  h.push_back("lambda");
  h.push_back("jumps");
  const auto path = dir / "trajectories.csv";
  CsvWriter w(path, cfg, h);
  const JumpEngine engine(pair, cfg.t0, cfg.t1, cfg.dt, cfg.record_stride, cfg.tolerances);
  const auto& times = engine.record_times();
  const std::size_t n = std::min(cfg.record_trajectories, cfg.n_traj);
  for (std::size_t i = 0; i < n; ++i) {
    // Same stream as trajectory i of the ensemble.
    Rng rng = trajectory_rng(cfg.seed, i);
    StateVector psi = sampler(rng);
    long jumps = 0;
    engine.run(
        std::move(psi), rng,
        [&](long k, const JumpEngine::Sample& s) {
          std::vector<double> v{times[static_cast<std::size_t>(k)], static_cast<double>(i)};
          for (Index j = 0; j < d; ++j) {
            v.push_back(s.psi(j).real());
            v.push_back(s.psi(j).imag());
          }
          v.push_back(std::exp(s.log_scale) * s.lambda);
          v.push_back(s.lambda);
          v.push_back(static_cast<double>(jumps));
          w.row(v);
        },
        [&](double, std::size_t) { ++jumps; });
  }
  return path.string();
}

// Recovered states on [t1, 2 t1 - t0] with HS error against the stored forward
// state at the mirrored time and against rho_0.
std::string write_recovery(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                           const RecoveryCurve& curve, const DensitySeries& forward) {
  const Index d = forward.states.front().rows();
  std::vector<std::string> h{"t"};
  matrix_columns(h, "rho", d);
  h.push_back("hs_error_forward");
  h.push_back("hs_error_rho0");
  h.push_back("min_eigenvalue_embedded");
  const auto path = dir / "recovery.csv";
  CsvWriter w(path, cfg, h);
  const double span = cfg.t1 - cfg.t0;
  for (std::size_t k = 0; k < curve.elapsed.size(); ++k) {
    std::vector<double> v{cfg.t1 + curve.elapsed[k]};
    matrix_values(v, curve.rho[k]);
    const double mirror = cfg.t1 - curve.elapsed[k];
    auto it = std::lower_bound(forward.times.begin(), forward.times.end(), mirror - 1e-9 * span);
    if (it != forward.times.end() && std::abs(*it - mirror) <= 1e-9 * span) {
      const auto idx = static_cast<std::size_t>(it - forward.times.begin());
      v.push_back(hs_norm(curve.rho[k] - forward.states[idx]));
    } else {
      v.push_back(std::nan(""));  // mirrored time not on the forward record grid
    }
    v.push_back(hs_norm(curve.rho[k] - forward.states.front()));
    v.push_back(curve.min_eigenvalue[k]);
    w.row(v);
  }
  return path.string();
}

// Martingale samples against the embedding curve on the same record grid.
std::string write_martingale(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                             const EnsembleEstimate& e, const RecoveryCurve& curve,
                             const std::string& name) {
  const Index d = e.rho_hat.front().rows();
  std::vector<std::string> h{"t"};
  matrix_columns(h, "rho_hat", d);
  matrix_columns(h, "rho_hat_se", d);
  matrix_columns(h, "rho_embedding", d);
  h.push_back("max_z");
  const auto path = dir / name;
  CsvWriter w(path, cfg, h);
  for (std::size_t k = 0; k < e.grid.size(); ++k) {
    const ComplexMatrix& ref = curve.rho[k];
    std::vector<double> v{cfg.t1 + (e.grid[k] - e.grid.front())};
    matrix_values(v, e.rho_hat[k]);
    matrix_values(v, e.rho_hat_se[k]);
    matrix_values(v, ref);
    double z = 0.0;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) {
        const Complex diff = e.rho_hat[k](i, j) - ref(i, j);
        const Complex se = e.rho_hat_se[k](i, j);
        if (se.real() > 0.0) z = std::max(z, std::abs(diff.real()) / se.real());
        if (se.imag() > 0.0) z = std::max(z, std::abs(diff.imag()) / se.imag());
      }
    v.push_back(z);
    w.row(v);
  }
  return path.string();
}

// Record stride that puts `samples` records evenly on the grid when possible.
long sample_stride(const ExperimentConfig& cfg, long samples) {
  const long n = TimeGrid{cfg.t0, cfg.t1, cfg.dt}.steps();
  return n % samples == 0 ? n / samples : 1;
}

RunResult run_recover(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool martingale,
                      bool forward_csv) {
  RunResult res;
  const auto me = build_equation(cfg);
  const ComplexMatrix rho0 = build_initial_state(cfg);
  const DensitySeries forward = integrate_density(me, rho0, cfg.t0, cfg.t1, cfg.dt, cfg.record_stride);
  if (forward_csv) res.files.push_back(write_density(dir, cfg, forward));
  const ComplexMatrix rho_t1 = forward.states.back();
  const RecoveryCurve curve = recovery_curve(me, rho_t1, cfg.t0, cfg.t1, cfg.dt, cfg.record_stride);
  res.files.push_back(write_recovery(dir, cfg, curve, forward));
  if (martingale) {
    EnsembleOptions opts = ensemble_options(cfg);
    const bool twenty = cfg.mode == Mode::reproduce_thermal_qubit;
    if (twenty) opts.record_stride = sample_stride(cfg, 20);
    const EnsembleEstimate e = recover_by_martingale(me, rho_t1, cfg.t0, cfg.t1, opts);
    if (!twenty) res.files.push_back(write_ensemble(dir, cfg, e, cfg.t1, 1.0));
    const RecoveryCurve matched =
        opts.record_stride == cfg.record_stride
            ? curve
            : recovery_curve(me, rho_t1, cfg.t0, cfg.t1, cfg.dt, opts.record_stride);
    res.files.push_back(write_martingale(dir, cfg, e, matched,
                                         twenty ? "martingale.csv" : "martingale_vs_embedding.csv"));
  }
  return res;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
  return buf;
}

PairedEquations configured_pair(const ExperimentConfig& cfg, const CanonicalMasterEquation& me) {
  const auto grid = grid_of(cfg);
  const CanonicalMasterEquation eq = povm_complete(me, grid, cfg.tolerances) ? me : pad_equation(me, grid);
  if (cfg.shift == "optimal") return pair_optimal(eq, grid);
  return pair(eq, parse_profile(cfg.shift), grid);
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  RunResult res;

  switch (cfg.mode) {
    case Mode::integrate: {
      const auto me = build_equation(cfg);
      const auto s = integrate_density(me, build_initial_state(cfg), cfg.t0, cfg.t1, cfg.dt, cfg.record_stride);
      res.files.push_back(write_density(dir, cfg, s));
      break;
    }
    case Mode::unravel: {
      const auto me = build_equation(cfg);
      const PairedEquations p = configured_pair(cfg, me);
      const auto sampler = density_sampler(build_initial_state(cfg));
      const EnsembleEstimate e = ensemble_estimate(p, sampler, cfg.t0, cfg.t1, ensemble_options(cfg));
      res.files.push_back(write_ensemble(dir, cfg, e, cfg.t0, 1.0));
      res.files.push_back(write_bound(dir, cfg, variance_bound_check(e, p)));
      res.files.push_back(write_trajectories(dir, cfg, p, sampler));
      break;
    }
    case Mode::pair: {
      const auto me = build_equation(cfg);
      const PairedEquations p = configured_pair(cfg, me);
      const std::size_t L = p.source.num_channels();
      std::vector<std::string> h{"t"};
      for (std::size_t l = 0; l < L; ++l) h.push_back("w_" + std::to_string(l));
      h.push_back("c");
      for (std::size_t l = 0; l < L; ++l) h.push_back("r_" + std::to_string(l));
      h.push_back("min_w");
      const auto path = dir / "pairing.csv";
      CsvWriter w(path, cfg, h);
      const auto grid = grid_of(cfg);
      for (std::size_t k = 0; k < grid.size(); k += static_cast<std::size_t>(cfg.record_stride)) {
        const double t = grid[k];
        std::vector<double> v{t};
        for (std::size_t l = 0; l < L; ++l) v.push_back(p.source.rate(l, t));
        v.push_back(p.shift(t));
        for (std::size_t l = 0; l < L; ++l) v.push_back(p.paired_cp.rate(l, t));
        v.push_back(p.source.min_rate(t));
        w.row(v);
      }
      res.files.push_back(path.string());
      break;
    }
    case Mode::embed: {
      const auto me = build_equation(cfg);
      const PairedEquations p = configured_pair(cfg, me);
      const auto eme = build_embedding(p, grid_of(cfg));
      const ComplexMatrix rho0 = build_initial_state(cfg);
      const auto series = integrate_embedded(eme, embed_state(rho0), cfg.t0, cfg.t1, cfg.dt, cfg.record_stride);
      const auto dense = integrate_density(p.source, rho0, cfg.t0, cfg.t1, cfg.dt, cfg.record_stride);
      const auto dense_cp = integrate_density(p.paired_cp, rho0, cfg.t0, cfg.t1, cfg.dt, cfg.record_stride);
      const Index d = rho0.rows();
      std::vector<std::string> h{"t"};
      matrix_columns(h, "rho", d);
      matrix_columns(h, "rho_tilde", d);
      for (const char* c : {"hs_error_rho", "hs_error_rho_tilde", "min_eigenvalue_gamma", "c_integral"})
        h.push_back(c);
      const auto path = dir / "embedding.csv";
      CsvWriter w(path, cfg, h);
      const double g = p.source.povm_constant();
      for (std::size_t k = 0; k < series.times.size(); ++k) {
        const auto blocks = extract_blocks(series.states[k], series.c_integral[k], g);
        std::vector<double> v{series.times[k]};
        matrix_values(v, blocks.rho);
        matrix_values(v, blocks.rho_tilde);
        v.push_back(hs_norm(blocks.rho - dense.states[k]));
        v.push_back(hs_norm(blocks.rho_tilde - dense_cp.states[k]));
        v.push_back(min_hermitian_eigenvalue(hermitize(series.states[k].gamma)));
        v.push_back(series.c_integral[k]);
        w.row(v);
      }
      res.files.push_back(path.string());
      break;
    }
    case Mode::recover_embedding:
      return run_recover(cfg, dir, false, false);
    case Mode::recover_martingale:
      return run_recover(cfg, dir, true, false);
    case Mode::reproduce_thermal_qubit:
      return run_recover(cfg, dir, true, true);
    case Mode::spa_scan: {
      const auto me = build_equation(cfg);
      std::vector<double> times = cfg.spa_times;
      if (times.empty()) times.push_back(cfg.t0);
      const auto path = dir / "spa.csv";
      CsvWriter w(path, cfg, {"t", "dt", "n_star", "factor", "n", "choi_min_eigenvalue"});
      for (double t : times) {
        const double n_star = min_isotropic_noise(me, t);
        for (double step : cfg.spa_dts)
          for (double f : cfg.spa_factors) {
            const Superoperator s = spa_deformed_step(me, t, step, f * n_star);
            w.row({t, step, n_star, f, f * n_star, min_hermitian_eigenvalue(hermitize(choi_matrix(s)))});
          }
      }
      res.files.push_back(path.string());
      break;
    }
  }
  return res;
}

std::string validation_report(const ExperimentConfig& cfg, bool& passed) {
  std::ostringstream os;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016" PRIx64, cfg.hash);
  os << "config_hash=" << hash << "\n"
     << "version=" << kVersion << "\n"
     << "mode=" << to_string(cfg.mode) << "\n"
     << "dim=" << cfg.dim << "\n"
     << "window=" << format_number(cfg.t0) << "," << format_number(cfg.t1) << "\n"
     << "dt=" << format_number(cfg.dt) << "\n"
     << "steps=" << TimeGrid{cfg.t0, cfg.t1, cfg.dt}.steps() << "\n";
  const auto me = build_equation(cfg);
  const auto grid = grid_of(cfg);
  const ValidationReport rep = validate_canonical(me, grid);
  os << "channels=" << me.num_channels() << "\n"
     << "povm_constant=" << format_number(me.povm_constant()) << "\n"
     << rep.summary(cfg.tolerances);
  passed = rep.finite_rates && rep.hamiltonian_ok(cfg.tolerances) &&
           (!rep.canonical_flag || rep.canonical_structure(cfg.tolerances));
  if (!rep.povm_ok(cfg.tolerances)) os << "povm_padding=required\n";

  double min_w = me.min_rate(grid.front());
  for (double t : grid) min_w = std::min(min_w, me.min_rate(t));
  os << "min_rate=" << format_number(min_w) << "\n";
  const bool uses_pair = cfg.mode == Mode::unravel || cfg.mode == Mode::pair || cfg.mode == Mode::embed;
  if (uses_pair) {
    try {
      configured_pair(cfg, me);
      os << "pairing=ok\n";
    } catch (const std::exception& e) {
      os << "pairing=fail " << e.what() << "\n";
      passed = false;
    }
  }
  const bool uses_reversal = cfg.mode == Mode::recover_embedding || cfg.mode == Mode::recover_martingale ||
                             cfg.mode == Mode::reproduce_thermal_qubit;
  if (uses_reversal && min_w < 0.0) {
    os << "reversal=fail forward equation has a negative rate\n";
    passed = false;
  }
  os << "result=" << (passed ? "pass" : "fail") << "\n";
  return os.str();
}

}  // namespace cbu
