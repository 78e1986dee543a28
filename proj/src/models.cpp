#include "cbu/models.hpp"

#include <cmath>

namespace cbu::models {

CanonicalMasterEquation thermal_qubit(double g, double beta, double omega, double drive,
                                      double frequency) {
  const ComplexMatrix s1 = pauli::sigma1();
  const ComplexMatrix s3 = pauli::sigma3();
  auto hamiltonian = [s1, s3, drive, frequency](double t) {
    return ComplexMatrix(0.5 * s3 + drive * std::sin(frequency * t) * s1);
  };
  std::vector<Channel> chans{
      {constant_matrix(pauli::sigma_plus()), constant_rate(g)},
      {constant_matrix(pauli::sigma_minus()), constant_rate(g * std::exp(beta * omega))},
  };
  return {2, hamiltonian, std::move(chans), 1.0, false};
}

CanonicalMasterEquation negative_rate_qubit() {
  const ComplexMatrix h = 0.5 * pauli::sigma3() + 0.25 * pauli::sigma1();
  return make_canonical(2, constant_matrix(h),
                        {constant_rate(0.6), constant_rate(0.4),
                         [](double t) { return -0.3 + 0.1 * std::sin(2.0 * t); }});
}

CanonicalMasterEquation single_decay_qubit(double w) {
  std::vector<Channel> chans{{constant_matrix(pauli::sigma_minus()), constant_rate(w)}};
  // sigma_+ sigma_- = |e><e| is not proportional to 1; the constant is nominal.
  return {2, constant_matrix(0.5 * pauli::sigma1()), std::move(chans), 1.0, false};
}

ComplexMatrix excited_state() {
  ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
  rho(0, 0) = 1.0;
  return rho;
}

}  // namespace cbu::models
