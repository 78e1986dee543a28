#pragma once

#include <vector>

#include "cbu/embedding.hpp"
#include "cbu/unraveling.hpp"

namespace cbu {

// Forward-time description of the inverse of a CP flow on [t0, t1]:
//   H_rev(t) = -H(t0 + t1 - t),  L_rev(t) = L(t0 + t1 - t),  w_l(t) = -h_l(t0 + t1 - t)
// paired with c(t) = 2 max_l h_l(t0 + t1 - t), so that r_l = c - h_l(t0 + t1 - t) >= 0.
struct ReversalSetup {
  CanonicalMasterEquation forward;
  double t0 = 0.0;
  double t1 = 0.0;
  CanonicalMasterEquation reversed;
  RateProfile c;
  PairedEquations pair;

  double mirror(double t) const { return t0 + t1 - t; }
};

// Throws std::invalid_argument if a forward rate is negative on the grid.
ReversalSetup build_reversal(const CanonicalMasterEquation& forward, double t0, double t1,
                             double dt = 1e-4);

struct RecoveryCurve {
  std::vector<double> elapsed;           // time since the start of the recovery, in [0, t1 - t0]
  std::vector<ComplexMatrix> rho;        // recovered state: forward state at t1 - elapsed
  std::vector<double> min_eigenvalue;    // of the embedded state
};

// Steps: tensor rho_t1 with the ancilla state (1 + sigma_1) / 2, evolve the
// embedding of the paired reversed equation, read the state off the
// sigma_1 component of the ancilla and undo the exp(-g int c) rescaling.
RecoveryCurve recovery_curve(const CanonicalMasterEquation& forward, const ComplexMatrix& rho_t1,
                             double t0, double t1, double dt, long stride = 1);

ComplexMatrix recover_by_embedding(const CanonicalMasterEquation& forward,
                                   const ComplexMatrix& rho_t1, double t0, double t1, double dt);

// Weighted jump unraveling of the reversed equation started from the
// eigen-decomposition of rho_t1. rho_hat at elapsed time s estimates the
// forward state at t1 - s.
EnsembleEstimate recover_by_martingale(const CanonicalMasterEquation& forward,
                                       const ComplexMatrix& rho_t1, double t0, double t1,
                                       const EnsembleOptions& opts);

}  // namespace cbu
