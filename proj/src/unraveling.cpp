#include "cbu/unraveling.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "cbu/rk4.hpp"

namespace cbu {

Rng trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

double uniform01(Rng& rng) {
  // 53 random bits; identical on every platform, unlike uniform_real_distribution.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

InitialStateSampler pure_state_sampler(StateVector psi) {
  psi.normalize();
  return [psi = std::move(psi)](Rng&) { return psi; };
}

InitialStateSampler density_sampler(const ComplexMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(rho));
  Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) throw std::invalid_argument("density_sampler: state has no positive weight");
  w /= total;
  std::vector<double> cdf(static_cast<std::size_t>(w.size()));
  double acc = 0.0;
  for (Index i = 0; i < w.size(); ++i) cdf[static_cast<std::size_t>(i)] = (acc += w(i));
  cdf.back() = 1.0;
  ComplexMatrix vecs = es.eigenvectors();
  return [cdf = std::move(cdf), vecs = std::move(vecs), w](Rng& rng) -> StateVector {
    const double u = uniform01(rng);
    std::size_t i = 0;
    while (i + 1 < cdf.size() && (u >= cdf[i] || w(static_cast<Index>(i)) == 0.0)) ++i;
    return vecs.col(static_cast<Index>(i));
  };
}

StateVector drift(const PairedEquations& pair, const StateVector& psi, double t) {
  const auto& me = pair.paired_cp;
  StateVector f = -kI * (me.hamiltonian(t) * psi);
  for (std::size_t l = 0; l < me.num_channels(); ++l) {
    const double r = me.rate(l, t);
    if (r == 0.0) continue;
    const ComplexMatrix L = me.op(l, t);
    const StateVector Lpsi = L * psi;
    f -= 0.5 * r * (L.adjoint() * Lpsi - Lpsi.squaredNorm() * psi);
  }
  return f;
}

JumpEngine::JumpEngine(const PairedEquations& pair, double t0, double t1, double dt,
                       long record_stride, const Tolerances& tol)
    : dim_(pair.paired_cp.dim()),
      n_channels_(pair.paired_cp.num_channels()),
      record_stride_(record_stride) {
  if (record_stride < 1) throw std::invalid_argument("JumpEngine: record stride must be >= 1");
  const auto& src = pair.source;
  const auto& cp = pair.paired_cp;
  const double g = src.povm_constant();
  const TimeGrid grid{t0, t1, dt};
  const long n = grid.steps();
  const double h = grid.step();
  const ComplexMatrix id = ComplexMatrix::Identity(dim_, dim_);

  auto effective = [&](double t) {
    ComplexMatrix k = -kI * cp.hamiltonian(t);
    for (std::size_t l = 0; l < n_channels_; ++l) {
      const double r = cp.rate(l, t);
      if (r == 0.0) continue;
      const ComplexMatrix L = cp.op(l, t);
      k -= 0.5 * r * (L.adjoint() * L);
    }
    return k;
  };
  auto propagate = [&](double t, const ComplexMatrix& y) -> ComplexMatrix {
    return effective(t) * y;
  };

  steps_.reserve(static_cast<std::size_t>(n));
  record_times_.push_back(t0);
  record_log_scale_.push_back(0.0);
  double log_scale = 0.0;
  for (long k = 0; k < n; ++k) {
    Step s;
    s.t = grid.time(k);
    s.no_jump = detail::rk4_step(propagate, s.t, id, h);
    ComplexMatrix povm = ComplexMatrix::Zero(dim_, dim_);
    for (std::size_t l = 0; l < n_channels_; ++l) {
      ComplexMatrix L = cp.op(l, s.t);
      const double r = cp.rate(l, s.t);
      const double w = src.rate(l, s.t);
      if (!std::isfinite(r) || !std::isfinite(w))
        throw NumericalError("JumpEngine: non-finite rate at t=" + std::to_string(s.t));
      if (r < -1e-12) {
        std::ostringstream os;
        os << "JumpEngine: negative paired rate " << r << " in channel " << l << " at t=" << s.t;
        throw std::invalid_argument(os.str());
      }
      if (std::max(r, 0.0) * g * h >= 0.05) {
        std::ostringstream os;
        os << "JumpEngine: step too large, r*g*dt=" << r * g * h << " >= 0.05 at t=" << s.t;
        throw std::invalid_argument(os.str());
      }
      s.ops_sq.push_back(L.adjoint() * L);
      povm += s.ops_sq.back();
      s.ops.push_back(std::move(L));
      s.jump_weight.push_back(r > 0.0 ? r * h : 0.0);
      s.jump_factor.push_back(r > 0.0 ? w / r : 1.0);
    }
    if (max_abs(povm - g * id) > tol.povm) {
      std::ostringstream os;
      os << "JumpEngine: operators violate sum L^dagger L = " << g << " * 1 at t=" << s.t
         << " (deviation " << max_abs(povm - g * id) << "); pad the operator set first";
      throw std::invalid_argument(os.str());
    }
    const auto& c = pair.shift;
    s.log_increment = g * h / 6.0 * (c(s.t) + 4.0 * c(s.t + 0.5 * h) + c(s.t + h));
    log_scale += s.log_increment;
    steps_.push_back(std::move(s));
    if ((k + 1) % record_stride_ == 0 || k + 1 == n) {
      record_times_.push_back(grid.time(k + 1));
      record_log_scale_.push_back(log_scale);
    }
  }
}

Trajectory simulate_trajectory(const PairedEquations& pair, const StateVector& psi0, double t0,
                               double t1, double dt, std::uint64_t seed, std::uint64_t index,
                               long record_stride) {
  if (std::abs(psi0.norm() - 1.0) > default_tolerances().state_norm)
    throw std::invalid_argument("simulate_trajectory: initial state is not normalized");
  const JumpEngine engine(pair, t0, t1, dt, record_stride);
  Trajectory tr;
  tr.seed = seed;
  tr.index = index;
  tr.grid = engine.record_times();
  Rng rng = trajectory_rng(seed, index);
  engine.run(
      psi0, rng,
      [&](long, const JumpEngine::Sample& s) {
        tr.psi.push_back(s.psi);
        tr.lambda.push_back(s.lambda);
        tr.log_scale.push_back(s.log_scale);
        tr.mu.push_back(std::exp(s.log_scale) * s.lambda);
      },
      [&](double t, std::size_t l) { tr.jumps.push_back({t, l}); });
  return tr;
}

namespace {

struct RecordAccumulator {
  ComplexMatrix mu_sum, tilde_sum;
  Eigen::ArrayXXd mu_re2, mu_im2, tilde_re2, tilde_im2, diff_re2, diff_im2;
  double mu1 = 0.0, mu2 = 0.0, mu4 = 0.0;
  double max_lambda = 0.0;

  explicit RecordAccumulator(Index d)
      : mu_sum(ComplexMatrix::Zero(d, d)),
        tilde_sum(ComplexMatrix::Zero(d, d)),
        mu_re2(Eigen::ArrayXXd::Zero(d, d)),
        mu_im2(Eigen::ArrayXXd::Zero(d, d)),
        tilde_re2(Eigen::ArrayXXd::Zero(d, d)),
        tilde_im2(Eigen::ArrayXXd::Zero(d, d)),
        diff_re2(Eigen::ArrayXXd::Zero(d, d)),
        diff_im2(Eigen::ArrayXXd::Zero(d, d)) {}

  void add(const StateVector& psi, double mu, double max_lambda_seen, ComplexMatrix& scratch) {
    scratch.noalias() = psi * psi.adjoint();
    const Eigen::ArrayXXd re = scratch.real().array();
    const Eigen::ArrayXXd im = scratch.imag().array();
    tilde_sum += scratch;
    mu_sum += mu * scratch;
    tilde_re2 += re.square();
    tilde_im2 += im.square();
    mu_re2 += (mu * mu) * re.square();
    mu_im2 += (mu * mu) * im.square();
    const double dm = mu - 1.0;
    diff_re2 += (dm * dm) * re.square();
    diff_im2 += (dm * dm) * im.square();
    mu1 += mu;
    mu2 += mu * mu;
    mu4 += mu * mu * mu * mu;
    max_lambda = std::max(max_lambda, max_lambda_seen);
  }

  void merge(const RecordAccumulator& o) {
    mu_sum += o.mu_sum;
    tilde_sum += o.tilde_sum;
    mu_re2 += o.mu_re2;
    mu_im2 += o.mu_im2;
    tilde_re2 += o.tilde_re2;
    tilde_im2 += o.tilde_im2;
    diff_re2 += o.diff_re2;
    diff_im2 += o.diff_im2;
    mu1 += o.mu1;
    mu2 += o.mu2;
    mu4 += o.mu4;
    max_lambda = std::max(max_lambda, o.max_lambda);
  }
};

using ChunkAccumulator = std::vector<RecordAccumulator>;

double standard_error(double sum, double sum_sq, double n) {
  if (n < 2.0) return 0.0;
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return std::sqrt(var / n);
}

Eigen::ArrayXXd standard_error(const Eigen::ArrayXXd& sum, const Eigen::ArrayXXd& sum_sq, double n) {
  if (n < 2.0) return Eigen::ArrayXXd::Zero(sum.rows(), sum.cols());
  const Eigen::ArrayXXd mean = sum / n;
  const Eigen::ArrayXXd var = ((sum_sq - n * mean.square()) / (n - 1.0)).max(0.0);
  return (var / n).sqrt();
}

ComplexMatrix complex_se(const ComplexMatrix& sum, const Eigen::ArrayXXd& re2,
                         const Eigen::ArrayXXd& im2, double n) {
  const Eigen::ArrayXXd se_re = standard_error(sum.real().array(), re2, n);
  const Eigen::ArrayXXd se_im = standard_error(sum.imag().array(), im2, n);
  ComplexMatrix out(sum.rows(), sum.cols());
  out.real() = se_re.matrix();
  out.imag() = se_im.matrix();
  return out;
}

constexpr std::size_t kChunkSize = 1000;

}  // namespace

EnsembleEstimate ensemble_estimate(const PairedEquations& pair, const InitialStateSampler& psi0,
                                   double t0, double t1, const EnsembleOptions& opts) {
  if (opts.n_traj < 1) throw std::invalid_argument("ensemble_estimate: n_traj must be >= 1");
  const JumpEngine engine(pair, t0, t1, opts.dt, opts.record_stride);
  const Index d = engine.dim();
  const std::size_t n_records = engine.record_times().size();
  const std::size_t n_chunks = (opts.n_traj + kChunkSize - 1) / kChunkSize;
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_chunks));

  ChunkAccumulator total(n_records, RecordAccumulator(d));
  // Chunks are merged strictly in index order so the floating-point result does
  // not depend on the thread count.
  std::vector<std::optional<ChunkAccumulator>> pending(n_chunks);
  std::size_t next_merge = 0;
  std::mutex merge_mutex;
  std::atomic<std::size_t> next_chunk{0};
  std::exception_ptr failure;

  auto worker = [&]() {
    ComplexMatrix scratch(d, d);
    try {
      for (;;) {
        const std::size_t chunk = next_chunk.fetch_add(1);
        if (chunk >= n_chunks) break;
        {
          std::lock_guard lock(merge_mutex);
          if (failure) break;
        }
        ChunkAccumulator acc(n_records, RecordAccumulator(d));
        const std::size_t first = chunk * kChunkSize;
        const std::size_t last = std::min(opts.n_traj, first + kChunkSize);
        for (std::size_t i = first; i < last; ++i) {
          Rng rng = trajectory_rng(opts.seed, i);
          StateVector psi = psi0(rng);
          engine.run(std::move(psi), rng, [&](long k, const JumpEngine::Sample& s) {
            const double mu = std::exp(s.log_scale) * s.lambda;
            acc[static_cast<std::size_t>(k)].add(s.psi, mu, s.max_abs_lambda, scratch);
          });
        }
        std::lock_guard lock(merge_mutex);
        pending[chunk] = std::move(acc);
        while (next_merge < n_chunks && pending[next_merge]) {
          for (std::size_t k = 0; k < n_records; ++k) total[k].merge((*pending[next_merge])[k]);
          pending[next_merge].reset();
          ++next_merge;
        }
      }
    } catch (...) {
      std::lock_guard lock(merge_mutex);
      if (!failure) failure = std::current_exception();
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleEstimate est;
  est.grid = engine.record_times();
  est.log_scale = engine.record_log_scale();
  est.n_traj = opts.n_traj;
  const double n = static_cast<double>(opts.n_traj);
  for (const auto& r : total) {
    est.rho_hat.push_back(r.mu_sum / n);
    est.rho_tilde_hat.push_back(r.tilde_sum / n);
    est.rho_hat_se.push_back(complex_se(r.mu_sum, r.mu_re2, r.mu_im2, n));
    est.rho_tilde_hat_se.push_back(complex_se(r.tilde_sum, r.tilde_re2, r.tilde_im2, n));
    est.difference_se.push_back(
        complex_se(r.mu_sum - r.tilde_sum, r.diff_re2, r.diff_im2, n));
    est.mu_mean.push_back(r.mu1 / n);
    est.mu_mean_se.push_back(standard_error(r.mu1, r.mu2, n));
    est.mu_sq_mean.push_back(r.mu2 / n);
    est.mu_sq_se.push_back(standard_error(r.mu2, r.mu4, n));
    est.max_abs_lambda.push_back(r.max_lambda);
  }
  return est;
}

double se_norm(const ComplexMatrix& se) {
  return std::sqrt(se.real().squaredNorm() + se.imag().squaredNorm());
}

bool VarianceBoundReport::any_violation() const {
  for (const auto& r : rows)
    if (r.violated) return true;
  return false;
}

VarianceBoundReport variance_bound_check(const EnsembleEstimate& est, const PairedEquations& pair) {
  VarianceBoundReport rep;
  rep.statistically_meaningful = est.n_traj >= 2;
  const auto& src = pair.source;
  const double g = src.povm_constant();
  auto integrand = [&](double t) {
    const double c = pair.shift(t);
    if (c == 0.0) return 0.0;
    const double denom = c + src.min_rate(t);
    return denom > 0.0 ? c * c / denom : std::numeric_limits<double>::infinity();
  };
  double exponent = 0.0;
  for (std::size_t k = 0; k < est.grid.size(); ++k) {
    if (k > 0) {
      const double a = est.grid[k - 1];
      const double b = est.grid[k];
      exponent += g * (b - a) / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b));
    }
    VarianceBoundRow row;
    row.t = est.grid[k];
    const ComplexMatrix diff = est.rho_hat[k] - est.rho_tilde_hat[k];
    row.distance_sq = diff.squaredNorm();
    row.mu_sq_minus_one = est.mu_sq_mean[k] - 1.0;
    row.difference = row.mu_sq_minus_one - row.distance_sq;
    row.envelope = std::expm1(exponent);
    const double se_diff = se_norm(est.difference_se[k]);
    const double se_dist = 2.0 * diff.norm() * se_diff + se_diff * se_diff;
    row.combined_se = std::hypot(est.mu_sq_se[k], se_dist);
    row.violated = row.distance_sq > row.mu_sq_minus_one + 3.0 * row.combined_se + 1e-12;
    rep.rows.push_back(row);
  }
  return rep;
}

PaddedOperators pad_povm(const std::vector<MatrixProfile>& ops, const std::vector<double>& grid,
                         double margin, const Tolerances& tol) {
  if (grid.empty()) throw std::invalid_argument("pad_povm: empty grid");
  if (ops.empty()) throw std::invalid_argument("pad_povm: empty operator set");
  auto povm_sum = [ops](double t) {
    ComplexMatrix s = ops.front()(t).adjoint() * ops.front()(t);
    for (std::size_t l = 1; l < ops.size(); ++l) s += ops[l](t).adjoint() * ops[l](t);
    return s;
  };
  double largest = 0.0;
  for (double t : grid) largest = std::max(largest, hermitian_eigenvalues(povm_sum(t)).maxCoeff());
  if (!(largest > 0.0)) throw std::invalid_argument("pad_povm: operators vanish on the grid");
  const double g = (1.0 + margin) * largest;

  PaddedOperators out;
  out.povm_constant = g;
  out.ops.push_back([povm_sum, g, tol](double t) {
    const ComplexMatrix s = povm_sum(t);
    return psd_sqrt(hermitize(g * ComplexMatrix::Identity(s.rows(), s.cols()) - s), tol);
  });
  for (const auto& op : ops) out.ops.push_back(op);
  return out;
}

CanonicalMasterEquation pad_equation(const CanonicalMasterEquation& me,
                                     const std::vector<double>& grid, double margin) {
  std::vector<MatrixProfile> ops;
  for (const auto& ch : me.channels()) ops.push_back(ch.op);
  PaddedOperators padded = pad_povm(ops, grid, margin);
  std::vector<Channel> chans;
  chans.push_back({padded.ops[0], constant_rate(0.0)});
  for (const auto& ch : me.channels()) chans.push_back(ch);
  return {me.dim(), me.hamiltonian_profile(), std::move(chans), padded.povm_constant, false};
}

Trajectory simulate_noncanonical(const CanonicalMasterEquation& me, const StateVector& psi0,
                                 double t0, double t1, double dt, std::uint64_t seed,
                                 std::uint64_t index, long record_stride) {
  const auto grid = TimeGrid{t0, t1, dt}.times();
  const CanonicalMasterEquation padded = pad_equation(me, grid);
  return simulate_trajectory(pair_optimal(padded, grid), psi0, t0, t1, dt, seed, index,
                             record_stride);
}

}  // namespace cbu
