#include "cbu/master_equation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cbu/rk4.hpp"

namespace cbu {

MatrixProfile constant_matrix(ComplexMatrix m) {
  return [m = std::move(m)](double) { return m; };
}

RateProfile constant_rate(double value) {
  return [value](double) { return value; };
}

long TimeGrid::steps() const {
  if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
  if (t1 < t0) throw std::invalid_argument("TimeGrid: t1 < t0");
  const double n = (t1 - t0) / dt;
  return static_cast<long>(std::ceil(n - 1e-9));
}

double TimeGrid::step() const {
  const long n = steps();
  return n == 0 ? 0.0 : (t1 - t0) / static_cast<double>(n);
}

double TimeGrid::time(long k) const {
  const long n = steps();
  if (k == n) return t1;
  return t0 + static_cast<double>(k) * step();
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> out;
  const long n = steps();
  out.reserve(static_cast<std::size_t>(n + 1));
  for (long k = 0; k <= n; ++k) out.push_back(time(k));
  return out;
}

CanonicalMasterEquation::CanonicalMasterEquation(Index dim, MatrixProfile hamiltonian,
                                                 std::vector<Channel> channels,
                                                 double povm_constant, bool canonical)
    : dim_(dim),
      hamiltonian_(std::move(hamiltonian)),
      channels_(std::move(channels)),
      povm_constant_(povm_constant),
      canonical_(canonical) {
  if (dim_ < 1) throw std::invalid_argument("master equation: dimension must be positive");
  if (!hamiltonian_) throw std::invalid_argument("master equation: missing Hamiltonian");
  for (const auto& ch : channels_)
    if (!ch.op || !ch.rate) throw std::invalid_argument("master equation: incomplete channel");
}

std::vector<double> CanonicalMasterEquation::rates(double t) const {
  std::vector<double> out;
  out.reserve(channels_.size());
  for (const auto& ch : channels_) out.push_back(ch.rate(t));
  return out;
}

double CanonicalMasterEquation::min_rate(double t) const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& ch : channels_) m = std::min(m, ch.rate(t));
  return m;
}

ComplexMatrix CanonicalMasterEquation::rhs(double t, const ComplexMatrix& rho) const {
  const ComplexMatrix H = hamiltonian_(t);
  ComplexMatrix out = -kI * (H * rho - rho * H);
  for (const auto& ch : channels_) {
    const double w = ch.rate(t);
    if (w != 0.0) out += w * dissipator(ch.op(t), rho);
  }
  return out;
}

CanonicalMasterEquation CanonicalMasterEquation::with_rates(std::vector<RateProfile> rates) const {
  if (rates.size() != channels_.size())
    throw std::invalid_argument("with_rates: rate count differs from channel count");
  std::vector<Channel> chans = channels_;
  for (std::size_t l = 0; l < chans.size(); ++l) chans[l].rate = std::move(rates[l]);
  return {dim_, hamiltonian_, std::move(chans), povm_constant_, canonical_};
}

bool ValidationReport::traceless_ok(const Tolerances& tol) const {
  return max_trace <= tol.orthonormality;
}
bool ValidationReport::orthonormal_ok(const Tolerances& tol) const {
  return max_orthonormality <= tol.orthonormality;
}
bool ValidationReport::povm_ok(const Tolerances& tol) const { return max_povm <= tol.povm; }
bool ValidationReport::hamiltonian_ok(const Tolerances& tol) const {
  return max_hamiltonian_hermiticity <= tol.hermiticity;
}
bool ValidationReport::canonical_structure(const Tolerances& tol) const {
  return traceless_ok(tol) && orthonormal_ok(tol) && channel_count_ok;
}
bool ValidationReport::passes(const Tolerances& tol) const {
  const bool structure = !canonical_flag || canonical_structure(tol);
  return finite_rates && povm_ok(tol) && hamiltonian_ok(tol) && structure;
}

std::string ValidationReport::summary(const Tolerances& tol) const {
  std::ostringstream os;
  os << "trace_violation=" << max_trace << (traceless_ok(tol) ? " ok" : " FAIL") << "\n"
     << "orthonormality_violation=" << max_orthonormality << (orthonormal_ok(tol) ? " ok" : " FAIL")
     << "\n"
     << "povm_violation=" << max_povm << (povm_ok(tol) ? " ok" : " FAIL") << "\n"
     << "hamiltonian_hermiticity=" << max_hamiltonian_hermiticity
     << (hamiltonian_ok(tol) ? " ok" : " FAIL") << "\n"
     << "finite_rates=" << (finite_rates ? "yes" : "no") << "\n"
     << "channel_count_is_d2_minus_1=" << (channel_count_ok ? "yes" : "no") << "\n"
     << "canonical_flag=" << (canonical_flag ? "true" : "false") << "\n"
     << "verdict=" << (passes(tol) ? "pass" : "fail") << "\n";
  return os.str();
}

ValidationReport validate_canonical(const CanonicalMasterEquation& me,
                                    const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("validate_canonical: empty grid");
  ValidationReport rep;
  const Index d = me.dim();
  const std::size_t n = me.num_channels();
  rep.canonical_flag = me.canonical();
  rep.channel_count_ok = static_cast<Index>(n) == d * d - 1;
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  for (double t : grid) {
    const ComplexMatrix H = me.hamiltonian(t);
    rep.max_hamiltonian_hermiticity = std::max(rep.max_hamiltonian_hermiticity, max_abs(H - H.adjoint()));
    std::vector<ComplexMatrix> ops;
    ops.reserve(n);
    ComplexMatrix povm = ComplexMatrix::Zero(d, d);
    for (std::size_t l = 0; l < n; ++l) {
      ops.push_back(me.op(l, t));
      povm += ops.back().adjoint() * ops.back();
      if (!std::isfinite(me.rate(l, t))) rep.finite_rates = false;
      rep.max_trace = std::max(rep.max_trace, std::abs(ops.back().trace()));
    }
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t k = 0; k < n; ++k) {
        const Complex target = l == k ? 1.0 : 0.0;
        rep.max_orthonormality =
            std::max(rep.max_orthonormality, std::abs(hs_inner(ops[l], ops[k]) - target));
      }
    rep.max_povm = std::max(rep.max_povm, max_abs(povm - me.povm_constant() * id));
  }
  return rep;
}

std::vector<ComplexMatrix> gell_mann_basis(Index d) {
  if (d < 2) throw std::invalid_argument("gell_mann_basis: d must be >= 2");
  std::vector<ComplexMatrix> out;
  out.reserve(static_cast<std::size_t>(d * d - 1));
  const double s = 1.0 / std::sqrt(2.0);
  for (Index j = 0; j < d; ++j) {
    for (Index k = j + 1; k < d; ++k) {
      ComplexMatrix sym = ComplexMatrix::Zero(d, d);
      sym(j, k) = s;
      sym(k, j) = s;
      out.push_back(sym);
      ComplexMatrix anti = ComplexMatrix::Zero(d, d);
      anti(j, k) = -kI * s;
      anti(k, j) = kI * s;
      out.push_back(anti);
    }
  }
  for (Index l = 1; l < d; ++l) {
    ComplexMatrix diag = ComplexMatrix::Zero(d, d);
    const double f = 1.0 / std::sqrt(static_cast<double>(l * (l + 1)));
    for (Index j = 0; j < l; ++j) diag(j, j) = f;
    diag(l, l) = -static_cast<double>(l) * f;
    out.push_back(diag);
  }
  return out;
}

CanonicalMasterEquation make_canonical(Index d, MatrixProfile hamiltonian,
                                       std::vector<RateProfile> rates) {
  auto basis = gell_mann_basis(d);
  if (rates.size() != basis.size())
    throw std::invalid_argument("make_canonical: need d^2 - 1 rates");
  std::vector<Channel> chans;
  for (std::size_t l = 0; l < basis.size(); ++l)
    chans.push_back({constant_matrix(basis[l]), std::move(rates[l])});
  const double g = static_cast<double>(d * d - 1) / static_cast<double>(d);
  return {d, std::move(hamiltonian), std::move(chans), g, true};
}

DensitySeries integrate_density(const CanonicalMasterEquation& me, const ComplexMatrix& rho0,
                                double t0, double t1, double dt, long stride) {
  if (rho0.rows() != me.dim() || rho0.cols() != me.dim())
    throw std::invalid_argument("integrate_density: initial state dimension mismatch");
  if (stride < 1) throw std::invalid_argument("integrate_density: stride must be >= 1");
  const TimeGrid grid{t0, t1, dt};
  const long n = grid.steps();
  const double h = grid.step();
  auto f = [&me](double t, const ComplexMatrix& rho) { return me.rhs(t, rho); };

  DensitySeries out;
  out.times.push_back(t0);
  out.states.push_back(rho0);
  ComplexMatrix rho = rho0;
  for (long k = 0; k < n; ++k) {
    const double t = grid.time(k);
    rho = detail::rk4_step(f, t, rho, h);
    if (!all_finite(rho)) {
      std::ostringstream os;
      os << "integrate_density: non-finite state at t=" << grid.time(k + 1);
      throw NumericalError(os.str());
    }
    if ((k + 1) % stride == 0 || k + 1 == n) {
      out.times.push_back(grid.time(k + 1));
      out.states.push_back(rho);
    }
  }
  return out;
}

ComplexMatrix generator_matrix(const CanonicalMasterEquation& me, double t) {
  const Index d = me.dim();
  const ComplexMatrix id = ComplexMatrix::Identity(d, d);
  const ComplexMatrix H = me.hamiltonian(t);
  ComplexMatrix g = -kI * (kron(id, H) - kron(H.transpose(), id));
  for (std::size_t l = 0; l < me.num_channels(); ++l) {
    const double w = me.rate(l, t);
    if (w != 0.0) g += w * dissipator_superoperator(me.op(l, t));
  }
  return g;
}

Superoperator generator_superoperator(const CanonicalMasterEquation& me, double t) {
  return {me.dim(), generator_matrix(me, t)};
}

Superoperator propagator(const CanonicalMasterEquation& me, double t0, double t1, double dt) {
  const Index d = me.dim();
  const TimeGrid grid{t0, t1, dt};
  const long n = grid.steps();
  const double h = grid.step();
  auto f = [&me](double t, const ComplexMatrix& p) -> ComplexMatrix {
    return generator_matrix(me, t) * p;
  };
  ComplexMatrix p = ComplexMatrix::Identity(d * d, d * d);
  for (long k = 0; k < n; ++k) p = detail::rk4_step(f, grid.time(k), p, h);
  return {d, p};
}

double optimal_c(const CanonicalMasterEquation& me, double t) {
  return 2.0 * std::max(0.0, -me.min_rate(t));
}

double min_isotropic_noise(const CanonicalMasterEquation& me, double t) {
  return static_cast<double>(me.dim()) * std::max(0.0, -me.min_rate(t));
}

PairedEquations pair(const CanonicalMasterEquation& me, RateProfile c,
                     const std::vector<double>& grid) {
  constexpr double slack = 1e-12;
  for (double t : grid) {
    const double ct = c(t);
    const double bound = -me.min_rate(t);
    if (!(ct >= -slack) || ct < bound - slack) {
      std::ostringstream os;
      os << "pair: constraint c >= -min w violated at t=" << t << " (c=" << ct
         << ", -min w=" << bound << ", margin=" << ct - bound << ")";
      throw std::invalid_argument(os.str());
    }
  }
  std::vector<RateProfile> rates;
  for (const auto& ch : me.channels())
    rates.push_back([w = ch.rate, c](double t) { return w(t) + c(t); });
  return {me, c, me.with_rates(std::move(rates))};
}

PairedEquations pair_optimal(const CanonicalMasterEquation& me, const std::vector<double>& grid) {
  return pair(me, [me](double t) { return optimal_c(me, t); }, grid);
}

Superoperator spa_deformed_step(const CanonicalMasterEquation& me, double t, double dt, double n) {
  const Index d = me.dim();
  const ComplexMatrix gen = generator_matrix(me, t);
  Eigen::JacobiSVD<ComplexMatrix> svd(gen);
  const double gen_norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  if (!(dt > 0.0) || dt * (std::abs(n) + gen_norm) >= 0.1) {
    std::ostringstream os;
    os << "spa_deformed_step: step too large (dt*(n+|L|)=" << dt * (std::abs(n) + gen_norm) << ")";
    throw std::invalid_argument(os.str());
  }
  const Index d2 = d * d;
  const ComplexMatrix id = ComplexMatrix::Identity(d2, d2);
  const Eigen::VectorXcd vid = vectorize(ComplexMatrix::Identity(d, d));
  // X -> Tr(X) 1 / d has matrix vec(1) vec(1)^T / d.
  const ComplexMatrix depolarize = vid * vid.transpose() / static_cast<double>(d);
  return {d, (1.0 - dt * n) * (id + dt * gen) + dt * n * depolarize};
}

CanonicalMasterEquation shift_transform(const CanonicalMasterEquation& me,
                                        std::vector<std::function<Complex(double)>> shifts) {
  if (shifts.size() != me.num_channels())
    throw std::invalid_argument("shift_transform: need one shift per channel");
  const Index d = me.dim();
  std::vector<Channel> chans;
  for (std::size_t l = 0; l < shifts.size(); ++l) {
    const Channel& ch = me.channels()[l];
    chans.push_back({[op = ch.op, s = shifts[l], d](double t) {
                       return ComplexMatrix(op(t) + s(t) * ComplexMatrix::Identity(d, d));
                     },
                     ch.rate});
  }
  // w D_{L+s}(rho) = w D_L(rho) + (w/2)[conj(s) L - s L^dagger, rho], absorbed by
  // H -> H - i sum_l (w_l/2)(conj(s_l) L_l - s_l L_l^dagger).
  auto hamiltonian = [base = me.channels(), h = me.hamiltonian_profile(), shifts](double t) {
    ComplexMatrix H = h(t);
    for (std::size_t l = 0; l < base.size(); ++l) {
      const Complex s = shifts[l](t);
      const ComplexMatrix L = base[l].op(t);
      H -= kI * (0.5 * base[l].rate(t)) * (std::conj(s) * L - s * ComplexMatrix(L.adjoint()));
    }
    return H;
  };
  return {d, hamiltonian, std::move(chans), me.povm_constant(), false};
}

}  // namespace cbu
