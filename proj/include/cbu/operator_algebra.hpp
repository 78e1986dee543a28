#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cbu {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using Index = Eigen::Index;

inline constexpr Complex kI{0.0, 1.0};

// Thresholds shared by every module. Callers may pass a modified copy.
struct Tolerances {
  double hermiticity = 1e-10;
  double psd_slack = 1e-9;
  double flow_composition = 1e-8;
  double trace = 1e-9;
  double orthonormality = 1e-10;
  double povm = 1e-9;
  double state_norm = 1e-9;
  double max_condition = 1e12;
};

const Tolerances& default_tolerances();

// Raised when a numerical procedure produces unusable output (non-finite
// entries, singular flows, step-size violations).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A density operator together with the trace it is expected to carry.
// Physical states have declared_trace = 1; rescaled blocks of the embedding
// carry the stored scalar instead.
struct DensityMatrix {
  ComplexMatrix matrix;
  double declared_trace = 1.0;

  Index dim() const { return matrix.rows(); }
};

struct DensityCheck {
  double hermiticity_violation = 0.0;
  double trace_violation = 0.0;
  double min_eigenvalue = 0.0;
  bool finite = true;
  bool ok(const Tolerances& tol = default_tolerances()) const {
    return finite && hermiticity_violation <= tol.hermiticity && trace_violation <= tol.trace;
  }
};

DensityCheck check_density(const DensityMatrix& rho);

// Matrix of a linear map on d x d matrices acting on column-stacked vectors.
// The map X -> A X B^dagger has matrix conj(B) kron A.
struct Superoperator {
  Index dim = 0;
  ComplexMatrix matrix;

  static Superoperator identity(Index d);
  ComplexMatrix apply(const ComplexMatrix& x) const;
  Superoperator operator*(const Superoperator& rhs) const;
};

Eigen::VectorXcd vectorize(const ComplexMatrix& x);
ComplexMatrix unvectorize(const Eigen::VectorXcd& v, Index d);

// Tr(a^dagger b).
Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b);
double hs_norm(const ComplexMatrix& a);
double max_abs(const ComplexMatrix& a);
bool all_finite(const ComplexMatrix& a);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

// Tr_1((weight kron 1_H) g) for g on C^2 kron H.
ComplexMatrix partial_trace_first(const ComplexMatrix& g, const ComplexMatrix& weight);

// D_L(rho) = L rho L^dagger - {L^dagger L, rho} / 2.
ComplexMatrix dissipator(const ComplexMatrix& L, const ComplexMatrix& rho);

// Superoperator of rho -> D_L(rho).
ComplexMatrix dissipator_superoperator(const ComplexMatrix& L);

// Numerical inverse of a flow. Throws NumericalError, quoting the condition
// number, when the flow is singular or worse conditioned than tol.max_condition.
Superoperator inverse_flow(const Superoperator& p, const Tolerances& tol = default_tolerances());
double condition_number(const ComplexMatrix& m);

// C = sum_ij E_ij kron p(E_ij).
ComplexMatrix choi_matrix(const Superoperator& p);

// Ascending eigenvalues of the Hermitian part of a.
Eigen::VectorXd hermitian_eigenvalues(const ComplexMatrix& a);
double min_hermitian_eigenvalue(const ComplexMatrix& a);

ComplexMatrix psd_sqrt(const ComplexMatrix& a, const Tolerances& tol = default_tolerances());

ComplexMatrix hermitize(const ComplexMatrix& a);

namespace pauli {
ComplexMatrix identity(Index d = 2);
ComplexMatrix sigma1();
ComplexMatrix sigma2();
ComplexMatrix sigma3();
// Basis order (|e>, |g>): sigma_plus = |e><g|, sigma_minus = |g><e|.
ComplexMatrix sigma_plus();
ComplexMatrix sigma_minus();
}  // namespace pauli

}  // namespace cbu
