#include "cbu/recovery.hpp"

#include <sstream>

namespace cbu {

ReversalSetup build_reversal(const CanonicalMasterEquation& forward, double t0, double t1,
                             double dt) {
  const auto grid = TimeGrid{t0, t1, dt}.times();
  for (double t : grid)
    for (std::size_t l = 0; l < forward.num_channels(); ++l)
      if (forward.rate(l, t) < 0.0) {
        std::ostringstream os;
        os << "build_reversal: negative forward rate " << forward.rate(l, t) << " in channel " << l
           << " at t=" << t;
        throw std::invalid_argument(os.str());
      }

  const double span = t0 + t1;
  std::vector<Channel> chans;
  for (const auto& ch : forward.channels())
    chans.push_back({[op = ch.op, span](double t) { return op(span - t); },
                     [h = ch.rate, span](double t) { return -h(span - t); }});
  auto hamiltonian = [h = forward.hamiltonian_profile(), span](double t) {
    return ComplexMatrix(-h(span - t));
  };
  CanonicalMasterEquation reversed(forward.dim(), hamiltonian, std::move(chans),
                                   forward.povm_constant(), forward.canonical());
  RateProfile c = [forward, span](double t) {
    double m = 0.0;
    for (std::size_t l = 0; l < forward.num_channels(); ++l) m = std::max(m, forward.rate(l, span - t));
    return 2.0 * m;
  };
  PairedEquations paired = pair(reversed, c, grid);
  return {forward, t0, t1, std::move(reversed), std::move(c), std::move(paired)};
}

RecoveryCurve recovery_curve(const CanonicalMasterEquation& forward, const ComplexMatrix& rho_t1,
                             double t0, double t1, double dt, long stride) {
  RecoveryCurve out;
  if (t1 == t0) {
    out.elapsed.push_back(0.0);
    out.rho.push_back(rho_t1);
    out.min_eigenvalue.push_back(min_hermitian_eigenvalue(rho_t1));
    return out;
  }
  const ReversalSetup setup = build_reversal(forward, t0, t1, dt);
  const auto grid = TimeGrid{t0, t1, dt}.times();
  const EmbeddedMasterEquation eme = build_embedding(setup.pair, grid);
  const EmbeddedSeries series = integrate_embedded(eme, embed_state(rho_t1), t0, t1, dt, stride);
  const double g = forward.povm_constant();
  const ComplexMatrix s1 = pauli::sigma1();
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    const ComplexMatrix& gamma = series.states[k].gamma;
    // Tr_1((sigma_1 kron 1) gamma) = gamma_12 + gamma_21.
    const ComplexMatrix read = partial_trace_first(gamma, s1);
    out.elapsed.push_back(series.times[k] - t0);
    out.rho.push_back(std::exp(g * series.c_integral[k]) * hermitize(read));
    out.min_eigenvalue.push_back(min_hermitian_eigenvalue(gamma));
  }
  return out;
}

ComplexMatrix recover_by_embedding(const CanonicalMasterEquation& forward,
                                   const ComplexMatrix& rho_t1, double t0, double t1, double dt) {
  const long every = std::max(1L, TimeGrid{t0, t1, dt}.steps());
  return recovery_curve(forward, rho_t1, t0, t1, dt, every).rho.back();
}

EnsembleEstimate recover_by_martingale(const CanonicalMasterEquation& forward,
                                       const ComplexMatrix& rho_t1, double t0, double t1,
                                       const EnsembleOptions& opts) {
  const ReversalSetup setup = build_reversal(forward, t0, t1, opts.dt);
  return ensemble_estimate(setup.pair, density_sampler(rho_t1), t0, t1, opts);
}

}  // namespace cbu
