#include "cbu/operator_algebra.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace cbu {

namespace {

void require_square_same(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols() << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

const Tolerances& default_tolerances() {
  static const Tolerances tol{};
  return tol;
}

DensityCheck check_density(const DensityMatrix& rho) {
  DensityCheck out;
  out.finite = all_finite(rho.matrix);
  if (!out.finite) return out;
  out.hermiticity_violation = max_abs(rho.matrix - rho.matrix.adjoint());
  out.trace_violation = std::abs(rho.matrix.trace() - Complex(rho.declared_trace));
  out.min_eigenvalue = min_hermitian_eigenvalue(rho.matrix);
  return out;
}

Superoperator Superoperator::identity(Index d) {
  return {d, ComplexMatrix::Identity(d * d, d * d)};
}

ComplexMatrix Superoperator::apply(const ComplexMatrix& x) const {
  return unvectorize(matrix * vectorize(x), dim);
}

Superoperator Superoperator::operator*(const Superoperator& rhs) const {
  if (dim != rhs.dim) throw std::invalid_argument("superoperator product: dimension mismatch");
  return {dim, matrix * rhs.matrix};
}

Eigen::VectorXcd vectorize(const ComplexMatrix& x) {
  // Eigen storage is column-major, so the raw buffer is already column-stacked.
  return Eigen::Map<const Eigen::VectorXcd>(x.data(), x.size());
}

ComplexMatrix unvectorize(const Eigen::VectorXcd& v, Index d) {
  if (v.size() != d * d) throw std::invalid_argument("unvectorize: size is not d^2");
  return Eigen::Map<const ComplexMatrix>(v.data(), d, d);
}

Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_square_same(a, b, "hs_inner");
  // Tr(a^dagger b) = sum_ij conj(a_ij) b_ij
  return (a.conjugate().cwiseProduct(b)).sum();
}

double hs_norm(const ComplexMatrix& a) { return a.norm(); }

double max_abs(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

bool all_finite(const ComplexMatrix& a) { return a.allFinite(); }

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

ComplexMatrix partial_trace_first(const ComplexMatrix& g, const ComplexMatrix& weight) {
  if (g.rows() != g.cols() || g.rows() % 2 != 0)
    throw std::invalid_argument("partial_trace_first: dimension is not even");
  if (weight.rows() != 2 || weight.cols() != 2)
    throw std::invalid_argument("partial_trace_first: weight must be 2x2");
  const Index d = g.rows() / 2;
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) out += weight(j, i) * g.block(i * d, j * d, d, d);
  return out;
}

ComplexMatrix dissipator(const ComplexMatrix& L, const ComplexMatrix& rho) {
  require_square_same(L, rho, "dissipator");
  const ComplexMatrix LdL = L.adjoint() * L;
  return L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

ComplexMatrix dissipator_superoperator(const ComplexMatrix& L) {
  const Index d = L.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix LdL = L.adjoint() * L;
  return kron(L.conjugate(), L) - 0.5 * kron(id, LdL) - 0.5 * kron(LdL.transpose(), id);
}

double condition_number(const ComplexMatrix& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 1.0;
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

Superoperator inverse_flow(const Superoperator& p, const Tolerances& tol) {
  const double cond = condition_number(p.matrix);
  if (!(cond < tol.max_condition)) {
    std::ostringstream os;
    os << "inverse_flow: flow is singular or ill-conditioned (condition number " << cond << ")";
    throw NumericalError(os.str());
  }
  return {p.dim, p.matrix.partialPivLu().inverse()};
}

ComplexMatrix choi_matrix(const Superoperator& p) {
  const Index d = p.dim;
  ComplexMatrix c = ComplexMatrix::Zero(d * d, d * d);
  ComplexMatrix unit = ComplexMatrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      unit.setZero();
      unit(i, j) = 1.0;
      c.block(i * d, j * d, d, d) = p.apply(unit);
    }
  }
  return c;
}

Eigen::VectorXd hermitian_eigenvalues(const ComplexMatrix& a) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double min_hermitian_eigenvalue(const ComplexMatrix& a) { return hermitian_eigenvalues(a)(0); }

ComplexMatrix psd_sqrt(const ComplexMatrix& a, const Tolerances& tol) {
  if (a.rows() != a.cols()) throw std::invalid_argument("psd_sqrt: matrix is not square");
  if (max_abs(a - a.adjoint()) > tol.hermiticity)
    throw std::invalid_argument("psd_sqrt: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitize(a));
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.size() > 0 && ev(0) < -tol.psd_slack) {
    std::ostringstream os;
    os << "psd_sqrt: eigenvalue " << ev(0) << " below -" << tol.psd_slack;
    throw std::invalid_argument(os.str());
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

ComplexMatrix hermitize(const ComplexMatrix& a) { return 0.5 * (a + a.adjoint()); }

namespace pauli {

ComplexMatrix identity(Index d) { return ComplexMatrix::Identity(d, d); }

ComplexMatrix sigma1() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

ComplexMatrix sigma2() {
  ComplexMatrix m(2, 2);
  m << 0, -kI, kI, 0;
  return m;
}

ComplexMatrix sigma3() {
  ComplexMatrix m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

ComplexMatrix sigma_plus() { return 0.5 * (sigma1() + kI * sigma2()); }
ComplexMatrix sigma_minus() { return 0.5 * (sigma1() - kI * sigma2()); }

}  // namespace pauli

}  // namespace cbu
