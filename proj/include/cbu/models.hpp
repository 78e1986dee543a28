#pragma once

#include "cbu/master_equation.hpp"

namespace cbu::models {

// Driven qubit coupled to a thermal bath:
//   H_t = sigma_3 / 2 + drive sin(frequency t) sigma_1,
//   channels sigma_+ at rate g and sigma_- at rate g exp(beta omega).
// The ladder pair satisfies sum L^dagger L = 1 but is not canonical.
CanonicalMasterEquation thermal_qubit(double g = 0.1, double beta = 1.0, double omega = 1.0,
                                      double drive = 3.0, double frequency = 15.0);

// Canonical qubit over sigma_i / sqrt(2) with H = sigma_3 / 2 + sigma_1 / 4 and
// rates (0.6, 0.4, -0.3 + 0.1 sin 2t): one channel is negative at all times.
CanonicalMasterEquation negative_rate_qubit();

// One sigma_- channel with constant rate w and H = sigma_1 / 2 (not POVM-complete).
CanonicalMasterEquation single_decay_qubit(double w = -0.2);

// |e><e| in the (|e>, |g>) basis.
ComplexMatrix excited_state();

}  // namespace cbu::models
