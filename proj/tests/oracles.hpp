#pragma once

// Reference computations written independently of the library internals.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

namespace oracle {

using Mat = Eigen::MatrixXcd;
using Cx = std::complex<double>;
inline const Cx I{0.0, 1.0};

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Eigen::VectorXcd vec(const Mat& x) {
  return Eigen::Map<const Eigen::VectorXcd>(x.data(), x.size());
}

inline Mat unvec(const Eigen::VectorXcd& v, Eigen::Index d) {
  return Eigen::Map<const Mat>(v.data(), d, d);
}

struct Term {
  Mat op;
  double rate;
};

// Generator matrix on column-stacked vectors, built entry by entry from
// L(E_ij) so it does not rely on any Kronecker identity.
inline Mat generator(const Mat& H, const std::vector<Term>& terms) {
  const Eigen::Index d = H.rows();
  Mat G(d * d, d * d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      Mat E = Mat::Zero(d, d);
      E(i, j) = 1.0;
      Mat out = -I * (H * E - E * H);
      for (const auto& t : terms) {
        const Mat LdL = t.op.adjoint() * t.op;
        out += t.rate * (t.op * E * t.op.adjoint() - 0.5 * (LdL * E + E * LdL));
      }
      G.col(j * d + i) = vec(out);
    }
  return G;
}

using GeneratorAt = std::function<Mat(double)>;

// Product of exponentials at midpoints (second order), refined by Richardson
// extrapolation between n and 2n steps.
inline Mat flow(const GeneratorAt& gen, double t0, double t1, long n) {
  auto product = [&](long steps) {
    const double h = (t1 - t0) / static_cast<double>(steps);
    Mat P = Mat::Identity(gen(t0).rows(), gen(t0).cols());
    for (long k = 0; k < steps; ++k) {
      const Mat A = gen(t0 + (static_cast<double>(k) + 0.5) * h) * Cx(h, 0.0);
      P = Mat(A.exp()) * P;
    }
    return P;
  };
  const Mat coarse = product(n);
  const Mat fine = product(2 * n);
  return (4.0 * fine - coarse) / 3.0;
}

inline Mat evolve(const GeneratorAt& gen, const Mat& rho0, double t0, double t1, long n) {
  return unvec(flow(gen, t0, t1, n) * vec(rho0), rho0.rows());
}

inline double hs(const Mat& a) { return std::sqrt((a.adjoint() * a).trace().real()); }

inline double min_eig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline Mat pauli(int k) {
  Mat m(2, 2);
  switch (k) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, -I, I, 0; break;
    default: m << 1, 0, 0, -1; break;
  }
  return m;
}

// The eight Gell-Mann matrices of SU(3), textbook normalization Tr = 2.
inline std::vector<Mat> gell_mann3() {
  std::vector<Mat> g(8, Mat::Zero(3, 3));
  g[0](0, 1) = g[0](1, 0) = 1.0;
  g[1](0, 1) = -I;
  g[1](1, 0) = I;
  g[2](0, 0) = 1.0;
  g[2](1, 1) = -1.0;
  g[3](0, 2) = g[3](2, 0) = 1.0;
  g[4](0, 2) = -I;
  g[4](2, 0) = I;
  g[5](1, 2) = g[5](2, 1) = 1.0;
  g[6](1, 2) = -I;
  g[6](2, 1) = I;
  g[7](0, 0) = g[7](1, 1) = 1.0 / std::sqrt(3.0);
  g[7](2, 2) = -2.0 / std::sqrt(3.0);
  return g;
}

}  // namespace oracle
