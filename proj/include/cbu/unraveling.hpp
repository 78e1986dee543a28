#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "cbu/master_equation.hpp"

namespace cbu {

using Rng = std::mt19937_64;
using InitialStateSampler = std::function<StateVector(Rng&)>;

// Independent stream per (master seed, trajectory index); results do not depend
// on which thread runs which trajectory.
Rng trajectory_rng(std::uint64_t seed, std::uint64_t index);
double uniform01(Rng& rng);

InitialStateSampler pure_state_sampler(StateVector psi);
// Samples eigenvectors of rho with their eigenvalues as probabilities, so that
// E[psi psi^dagger] = rho.
InitialStateSampler density_sampler(const ComplexMatrix& rho);

// -i H psi - sum_l r_l (L_l^dagger L_l - |L_l psi|^2) psi / 2 with the paired rates.
StateVector drift(const PairedEquations& pair, const StateVector& psi, double t);

struct JumpRecord {
  double time = 0.0;
  std::size_t channel = 0;
};

struct Trajectory {
  std::vector<double> grid;
  std::vector<StateVector> psi;
  std::vector<double> mu;
  std::vector<double> lambda;
  std::vector<double> log_scale;  // g * integral of c from t0
  std::vector<JumpRecord> jumps;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

// Piecewise-deterministic jump engine for one paired equation on a fixed grid.
//
// Per step of length h, channel l fires with probability r_l |L_l psi|^2 h
// (at most one jump per step). A jump maps psi to L_l psi / |L_l psi| and
// multiplies lambda by w_l / r_l. Otherwise psi is advanced by the RK4
// propagator of -i H - sum_l r_l L_l^dagger L_l / 2 and renormalized, which is
// the solution of the norm-preserving drift. mu = exp(g int c) * lambda.
//
// Everything that depends only on time is tabulated once at construction and
// shared by all trajectories.
class JumpEngine {
 public:
  JumpEngine(const PairedEquations& pair, double t0, double t1, double dt, long record_stride = 1,
             const Tolerances& tol = default_tolerances());

  Index dim() const { return dim_; }
  std::size_t num_channels() const { return n_channels_; }
  long steps() const { return static_cast<long>(steps_.size()); }
  const std::vector<double>& record_times() const { return record_times_; }
  // Cumulative g * int c at each record time.
  const std::vector<double>& record_log_scale() const { return record_log_scale_; }

  struct Sample {
    const StateVector& psi;
    double lambda;
    double log_scale;
    double max_abs_lambda;  // max |lambda| over steps since the previous record
  };

  // Observer is called as observer(record_index, Sample) at every record time,
  // including t0. OnJump is called as on_jump(time, channel).
  template <typename Observer, typename OnJump>
  void run(StateVector psi, Rng& rng, Observer&& observer, OnJump&& on_jump) const;

  template <typename Observer>
  void run(StateVector psi, Rng& rng, Observer&& observer) const {
    run(std::move(psi), rng, std::forward<Observer>(observer), [](double, std::size_t) {});
  }

 private:
  struct Step {
    double t = 0.0;
    ComplexMatrix no_jump;                // d x d propagator over the step
    std::vector<ComplexMatrix> ops;       // L_l(t)
    std::vector<ComplexMatrix> ops_sq;    // L_l(t)^dagger L_l(t)
    std::vector<double> jump_weight;      // r_l(t) * h
    std::vector<double> jump_factor;      // w_l(t) / r_l(t)
    double log_increment = 0.0;           // g * int_t^{t+h} c
  };

  Index dim_ = 0;
  std::size_t n_channels_ = 0;
  long record_stride_ = 1;
  std::vector<Step> steps_;
  std::vector<double> record_times_;
  std::vector<double> record_log_scale_;
};

Trajectory simulate_trajectory(const PairedEquations& pair, const StateVector& psi0, double t0,
                               double t1, double dt, std::uint64_t seed,
                               std::uint64_t index = 0, long record_stride = 1);

struct EnsembleOptions {
  double dt = 1e-3;
  long record_stride = 1;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
};

// Sample means on the record grid. Standard errors of complex entries are
// stored as (SE of real part) + i (SE of imaginary part).
struct EnsembleEstimate {
  std::vector<double> grid;
  std::vector<ComplexMatrix> rho_hat;          // E[mu psi psi^dagger]
  std::vector<ComplexMatrix> rho_hat_se;
  std::vector<ComplexMatrix> rho_tilde_hat;    // E[psi psi^dagger]
  std::vector<ComplexMatrix> rho_tilde_hat_se;
  std::vector<ComplexMatrix> difference_se;    // SE of E[(mu - 1) psi psi^dagger]
  std::vector<double> mu_mean;
  std::vector<double> mu_mean_se;
  std::vector<double> mu_sq_mean;
  std::vector<double> mu_sq_se;
  std::vector<double> max_abs_lambda;          // over all paths, steps up to the record
  std::vector<double> log_scale;               // g * int c
  std::size_t n_traj = 0;
};

EnsembleEstimate ensemble_estimate(const PairedEquations& pair, const InitialStateSampler& psi0,
                                   double t0, double t1, const EnsembleOptions& opts);

// Frobenius norm of an SE matrix (both real and imaginary parts).
double se_norm(const ComplexMatrix& se);

struct VarianceBoundRow {
  double t = 0.0;
  double distance_sq = 0.0;     // Tr(rho_hat - rho_tilde_hat)^2
  double mu_sq_minus_one = 0.0; // E[mu^2] - 1
  double difference = 0.0;      // (E[mu^2] - 1) - distance_sq
  double envelope = 0.0;        // exp(g int c^2 / (c + min w)) - 1
  double combined_se = 0.0;
  bool violated = false;        // distance_sq > mu_sq_minus_one + 3 combined_se
};

struct VarianceBoundReport {
  std::vector<VarianceBoundRow> rows;
  bool statistically_meaningful = true;  // false when n_traj < 2
  bool any_violation() const;
};

VarianceBoundReport variance_bound_check(const EnsembleEstimate& est, const PairedEquations& pair);

struct PaddedOperators {
  std::vector<MatrixProfile> ops;  // index 0 is the padding operator L_0
  double povm_constant = 0.0;
};

// Adds L_0 = sqrt(g' 1 - sum L^dagger L) with g' = (1 + margin) times the
// largest eigenvalue of sum L^dagger L over the grid.
PaddedOperators pad_povm(const std::vector<MatrixProfile>& ops, const std::vector<double>& grid,
                         double margin = 1e-6, const Tolerances& tol = default_tolerances());

// The equation with the padding channel prepended at index 0 with rate 0.
CanonicalMasterEquation pad_equation(const CanonicalMasterEquation& me,
                                     const std::vector<double>& grid, double margin = 1e-6);

// Pads, pairs with c = 2 max(0, -min w) and runs the jump engine. A jump in
// channel 0 multiplies mu by w_0 / r_0 = 0.
Trajectory simulate_noncanonical(const CanonicalMasterEquation& me, const StateVector& psi0,
                                 double t0, double t1, double dt, std::uint64_t seed,
                                 std::uint64_t index = 0, long record_stride = 1);

// ---------------------------------------------------------------------------

template <typename Observer, typename OnJump>
void JumpEngine::run(StateVector psi, Rng& rng, Observer&& observer, OnJump&& on_jump) const {
  if (psi.size() != dim_) throw std::invalid_argument("JumpEngine: initial state dimension mismatch");
  psi.normalize();
  StateVector tmp(dim_);
  std::vector<double> p(n_channels_);
  double lambda = 1.0;
  double log_scale = 0.0;
  double max_lambda = 1.0;
  long record = 0;
  observer(record++, Sample{psi, lambda, log_scale, max_lambda});

  const long n = static_cast<long>(steps_.size());
  const Index d = dim_;
  // Hand-written small dense products: the Eigen dynamic-size kernels carry
  // noticeable per-call overhead at d = 2..4.
  auto matvec = [d](const ComplexMatrix& m, const Complex* x, Complex* y) {
    const Complex* a = m.data();
    for (Index i = 0; i < d; ++i) y[i] = 0.0;
    for (Index j = 0; j < d; ++j) {
      const Complex xj = x[j];
      const Complex* col = a + j * d;
      for (Index i = 0; i < d; ++i) y[i] += col[i] * xj;
    }
  };
  auto expectation = [d](const ComplexMatrix& q, const Complex* x) {
    // Re <x, q x> for Hermitian q.
    const Complex* a = q.data();
    double acc = 0.0;
    for (Index j = 0; j < d; ++j) {
      Complex col = 0.0;
      for (Index i = 0; i < d; ++i) col += std::conj(x[i]) * a[i + j * d];
      acc += (col * x[j]).real();
    }
    return acc;
  };
  Complex* pv = psi.data();
  Complex* tv = tmp.data();
  for (long k = 0; k < n; ++k) {
    const Step& s = steps_[static_cast<std::size_t>(k)];
    double total = 0.0;
    for (std::size_t l = 0; l < n_channels_; ++l) {
      if (s.jump_weight[l] == 0.0) {
        p[l] = 0.0;
        continue;
      }
      p[l] = s.jump_weight[l] * std::max(0.0, expectation(s.ops_sq[l], pv));
      total += p[l];
    }
    if (total > 0.5) throw NumericalError("JumpEngine: jump probability per step exceeds 0.5");
    const double u = uniform01(rng);
    std::size_t fired = n_channels_;
    if (u < total) {
      double acc = 0.0;
      for (std::size_t l = 0; l < n_channels_; ++l) {
        acc += p[l];
        if (u < acc) {
          fired = l;
          break;
        }
      }
      if (fired == n_channels_) {
        // u landed in the rounding gap; take the last channel with weight.
        for (std::size_t l = n_channels_; l-- > 0;)
          if (p[l] > 0.0) {
            fired = l;
            break;
          }
      }
    }
    const ComplexMatrix& m = fired != n_channels_ ? s.ops[fired] : s.no_jump;
    matvec(m, pv, tv);
    double nrm2 = 0.0;
    for (Index i = 0; i < d; ++i) nrm2 += std::norm(tv[i]);
    if (!(nrm2 > 0.0) || !std::isfinite(nrm2))
      throw NumericalError("JumpEngine: non-finite or vanishing state at t=" + std::to_string(s.t));
    const double inv = 1.0 / std::sqrt(nrm2);
    for (Index i = 0; i < d; ++i) pv[i] = tv[i] * inv;
    if (fired != n_channels_) {
      lambda *= s.jump_factor[fired];
      on_jump(s.t, fired);
    }
    log_scale += s.log_increment;
    max_lambda = std::max(max_lambda, std::abs(lambda));
    if ((k + 1) % record_stride_ == 0 || k + 1 == n) {
      observer(record++, Sample{psi, lambda, log_scale, max_lambda});
      max_lambda = std::abs(lambda);
    }
  }
}

}  // namespace cbu
