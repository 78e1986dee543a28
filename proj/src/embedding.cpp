#include "cbu/embedding.hpp"

#include <cmath>
#include <sstream>

namespace cbu {

namespace {

double cos_theta_of(double w, double c) {
  const double r = w + c;
  // r == 0 only when w = c = 0: the channel is idle and the CP limit theta = 0 applies.
  if (r == 0.0) return 1.0;
  return w / r;
}

double clamp_unit(double x) { return std::max(-1.0, std::min(1.0, x)); }

}  // namespace

double EmbeddedMasterEquation::cos_theta(std::size_t l, double t) const {
  return clamp_unit(cos_theta_of(base.source.rate(l, t), base.shift(t)));
}

double EmbeddedMasterEquation::theta(std::size_t l, double t) const {
  return std::acos(cos_theta(l, t));
}

EmbeddedMasterEquation build_embedding(const PairedEquations& pair,
                                       const std::vector<double>& grid) {
  const auto& src = pair.source;
  for (double t : grid) {
    for (std::size_t l = 0; l < src.num_channels(); ++l) {
      const double ct = cos_theta_of(src.rate(l, t), pair.shift(t));
      if (!(std::abs(ct) <= 1.0 + 1e-12)) {
        std::ostringstream os;
        os << "build_embedding: |cos theta| = " << std::abs(ct) << " > 1 in channel " << l
           << " at t=" << t;
        throw std::invalid_argument(os.str());
      }
    }
  }

  const Index d = src.dim();
  const ComplexMatrix id2 = pauli::identity(2);
  const ComplexMatrix s3 = pauli::sigma3();
  std::vector<Channel> chans;
  for (std::size_t l = 0; l < src.num_channels(); ++l) {
    const auto& ch = src.channels()[l];
    auto angle = [w = ch.rate, c = pair.shift](double t) {
      return std::acos(clamp_unit(cos_theta_of(w(t), c(t))));
    };
    auto paired = [w = ch.rate, c = pair.shift](double t) { return w(t) + c(t); };
    chans.push_back({[op = ch.op, id2](double t) { return kron(id2, op(t)); },
                     [paired, angle](double t) {
                       const double half = std::cos(0.5 * angle(t));
                       return paired(t) * half * half;
                     }});
    chans.push_back({[op = ch.op, s3](double t) { return kron(s3, op(t)); },
                     [paired, angle](double t) {
                       const double half = std::sin(0.5 * angle(t));
                       return paired(t) * half * half;
                     }});
  }
  auto hamiltonian = [h = src.hamiltonian_profile(), id2](double t) { return kron(id2, h(t)); };

  // sum V^dagger V over the doubled set, measured rather than assumed.
  const double t_probe = grid.empty() ? 0.0 : grid.front();
  ComplexMatrix povm = ComplexMatrix::Zero(2 * d, 2 * d);
  for (const auto& ch : chans) {
    const ComplexMatrix V = ch.op(t_probe);
    povm += V.adjoint() * V;
  }
  const double g = povm.trace().real() / static_cast<double>(2 * d);

  return {pair, CanonicalMasterEquation(2 * d, hamiltonian, std::move(chans), g, false)};
}

ComplexMatrix EmbeddedState::block(int i, int j) const {
  const Index d = system_dim();
  return gamma.block(i * d, j * d, d, d);
}

EmbeddedState embed_state(const ComplexMatrix& rho) {
  return {kron(0.5 * (pauli::identity(2) + pauli::sigma1()), rho)};
}

EmbeddedState embed_state_diagonal(const ComplexMatrix& rho) {
  return {kron(0.5 * pauli::identity(2), rho)};
}

EmbeddedSeries integrate_embedded(const EmbeddedMasterEquation& eme, const EmbeddedState& gamma0,
                                  double t0, double t1, double dt, long stride) {
  const auto& eq = eme.equation;
  for (double t : TimeGrid{t0, t1, dt}.times())
    for (std::size_t l = 0; l < eq.num_channels(); ++l)
      if (eq.rate(l, t) < -1e-12)
        throw std::invalid_argument("integrate_embedded: negative embedded rate");

  const DensitySeries series = integrate_density(eq, gamma0.gamma, t0, t1, dt, stride);
  EmbeddedSeries out;
  out.times = series.times;
  for (const auto& g : series.states) out.states.push_back({g});

  // Simpson on each grid step, sampled at the same steps integrate_density records.
  const TimeGrid grid{t0, t1, dt};
  const long n = grid.steps();
  const double h = grid.step();
  const auto& c = eme.base.shift;
  double acc = 0.0;
  out.c_integral.push_back(0.0);
  for (long k = 0; k < n; ++k) {
    const double a = grid.time(k);
    acc += h / 6.0 * (c(a) + 4.0 * c(a + 0.5 * h) + c(a + h));
    if ((k + 1) % stride == 0 || k + 1 == n) out.c_integral.push_back(acc);
  }
  return out;
}

ExtractedBlocks extract_blocks(const EmbeddedState& gamma, double c_integral, double g) {
  const double scale = std::exp(g * c_integral);
  const ComplexMatrix upper = 2.0 * gamma.block(0, 1);
  const ComplexMatrix lower = 2.0 * gamma.block(1, 0);
  return {2.0 * gamma.block(0, 0), scale * 0.5 * (upper + lower.adjoint())};
}

CommutantCheck commutant_embedding_psd(const ComplexMatrix& T, Index d) {
  if (T.rows() != T.cols()) throw std::invalid_argument("commutant_embedding_psd: T not square");
  const Index m = T.rows();
  const ComplexMatrix id_d = ComplexMatrix::Identity(d, d);
  const ComplexMatrix id_md = ComplexMatrix::Identity(m * d, m * d);
  ComplexMatrix M(2 * m * d, 2 * m * d);
  M << id_md, kron(T, id_d), kron(ComplexMatrix(T.adjoint()), id_d), id_md;

  CommutantCheck out;
  out.min_eigenvalue = min_hermitian_eigenvalue(M);
  Eigen::JacobiSVD<ComplexMatrix> svd(T);
  out.max_singular_value = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  out.psd = out.min_eigenvalue >= -default_tolerances().psd_slack;
  out.consistent = out.psd == (out.max_singular_value <= 1.0 + default_tolerances().psd_slack);
  return out;
}

}  // namespace cbu
