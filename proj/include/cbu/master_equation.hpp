#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cbu/operator_algebra.hpp"

namespace cbu {

using MatrixProfile = std::function<ComplexMatrix(double)>;
using RateProfile = std::function<double(double)>;

MatrixProfile constant_matrix(ComplexMatrix m);
RateProfile constant_rate(double value);

// Uniform grid t0, t0 + h, ..., t1 with h the largest step <= dt dividing the
// window into an integer number of steps.
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 0.0;
  double dt = 1e-4;

  long steps() const;
  double step() const;
  double time(long k) const;
  std::vector<double> times() const;
};

struct Channel {
  MatrixProfile op;
  RateProfile rate;
};

// d(rho)/dt = -i[H_t, rho] + sum_l w_l(t) D_{L_l(t)}(rho).
//
// The operator set is expected to satisfy sum_l L_l^dagger L_l = g * 1 with
// g = povm_constant(). When canonical() is true the operators are in addition
// traceless, Hilbert-Schmidt orthonormal and there are d^2 - 1 of them.
// Validation is by sampling, see validate_canonical.
class CanonicalMasterEquation {
 public:
  CanonicalMasterEquation() = default;
  CanonicalMasterEquation(Index dim, MatrixProfile hamiltonian, std::vector<Channel> channels,
                          double povm_constant, bool canonical);

  Index dim() const { return dim_; }
  std::size_t num_channels() const { return channels_.size(); }
  double povm_constant() const { return povm_constant_; }
  bool canonical() const { return canonical_; }
  const std::vector<Channel>& channels() const { return channels_; }
  const MatrixProfile& hamiltonian_profile() const { return hamiltonian_; }

  ComplexMatrix hamiltonian(double t) const { return hamiltonian_(t); }
  ComplexMatrix op(std::size_t l, double t) const { return channels_[l].op(t); }
  double rate(std::size_t l, double t) const { return channels_[l].rate(t); }
  std::vector<double> rates(double t) const;
  double min_rate(double t) const;

  // Right-hand side of the master equation evaluated at (t, rho).
  ComplexMatrix rhs(double t, const ComplexMatrix& rho) const;

  CanonicalMasterEquation with_rates(std::vector<RateProfile> rates) const;

 private:
  Index dim_ = 0;
  MatrixProfile hamiltonian_;
  std::vector<Channel> channels_;
  double povm_constant_ = 0.0;
  bool canonical_ = false;
};

struct ValidationReport {
  double max_trace = 0.0;            // max |Tr L_l|
  double max_orthonormality = 0.0;   // max |Tr(L_l^dagger L_k) - delta_lk|
  double max_povm = 0.0;             // max |sum L^dagger L - g 1|
  double max_hamiltonian_hermiticity = 0.0;
  bool finite_rates = true;
  bool channel_count_ok = true;      // L == d^2 - 1
  bool canonical_flag = false;

  bool traceless_ok(const Tolerances& tol = default_tolerances()) const;
  bool orthonormal_ok(const Tolerances& tol = default_tolerances()) const;
  bool povm_ok(const Tolerances& tol = default_tolerances()) const;
  bool hamiltonian_ok(const Tolerances& tol = default_tolerances()) const;
  // Canonical structure: traceless, orthonormal and d^2 - 1 channels.
  bool canonical_structure(const Tolerances& tol = default_tolerances()) const;
  // POVM sum and Hermitian H always; canonical structure when the flag claims it.
  bool passes(const Tolerances& tol = default_tolerances()) const;
  std::string summary(const Tolerances& tol = default_tolerances()) const;
};

ValidationReport validate_canonical(const CanonicalMasterEquation& me,
                                    const std::vector<double>& grid);

// Generalized Gell-Mann matrices normalized to Tr(L^dagger L) = 1: the
// symmetric and antisymmetric off-diagonal ones for each j < k, then the d - 1
// diagonal ones.
std::vector<ComplexMatrix> gell_mann_basis(Index d);

// Equation in canonical form over the Gell-Mann basis of dimension d.
CanonicalMasterEquation make_canonical(Index d, MatrixProfile hamiltonian,
                                       std::vector<RateProfile> rates);

struct DensitySeries {
  std::vector<double> times;
  std::vector<ComplexMatrix> states;
};

// Fixed-step RK4 without trace renormalization. Records every `stride` steps
// (first and last points always included).
DensitySeries integrate_density(const CanonicalMasterEquation& me, const ComplexMatrix& rho0,
                                double t0, double t1, double dt, long stride = 1);

ComplexMatrix generator_matrix(const CanonicalMasterEquation& me, double t);
Superoperator generator_superoperator(const CanonicalMasterEquation& me, double t);

// Time-ordered flow B_{t1,t0} from RK4 stepping of dP/dt = L_t P.
Superoperator propagator(const CanonicalMasterEquation& me, double t0, double t1, double dt);

// 2 * max(0, -min_l w_l(t)).
double optimal_c(const CanonicalMasterEquation& me, double t);
// d * max(0, -min_l w_l(t)); equals (d / 2) optimal_c.
double min_isotropic_noise(const CanonicalMasterEquation& me, double t);

struct PairedEquations {
  CanonicalMasterEquation source;
  RateProfile shift;
  CanonicalMasterEquation paired_cp;  // rates r_l = w_l + c
};

// Throws std::invalid_argument naming the first grid time where
// c(t) < -min_l w_l(t).
PairedEquations pair(const CanonicalMasterEquation& me, RateProfile c,
                     const std::vector<double>& grid);
// Pairing with c = optimal_c(me, t).
PairedEquations pair_optimal(const CanonicalMasterEquation& me, const std::vector<double>& grid);

// (1 - dt n)(Id + dt L_t) + dt n Tr(.) 1 / d
Superoperator spa_deformed_step(const CanonicalMasterEquation& me, double t, double dt, double n);

// L_l -> L_l + s_l 1 with the Hamiltonian correction that keeps the generator
// unchanged. The result is flagged non-canonical.
CanonicalMasterEquation shift_transform(const CanonicalMasterEquation& me,
                                        std::vector<std::function<Complex(double)>> shifts);

}  // namespace cbu
