#pragma once

#include <vector>

#include "cbu/master_equation.hpp"

namespace cbu {

// Completely positive equation on C^2 kron H built from a paired equation.
// Channel 2l holds 1_2 kron L_l with rate r_l cos^2(theta_l / 2) and channel
// 2l + 1 holds sigma_3 kron L_l with rate r_l sin^2(theta_l / 2), where
// cos theta_l = w_l / (w_l + c). Diagonal blocks of the state then follow the
// paired CP equation and the off-diagonal blocks follow exp(-g int c) rho.
struct EmbeddedMasterEquation {
  PairedEquations base;
  CanonicalMasterEquation equation;  // dimension 2d, non-canonical flag

  double theta(std::size_t l, double t) const;
  double cos_theta(std::size_t l, double t) const;
  // Rates of the 1_2 kron L_l and sigma_3 kron L_l channels.
  double rate_identity(std::size_t l, double t) const { return equation.rate(2 * l, t); }
  double rate_sigma3(std::size_t l, double t) const { return equation.rate(2 * l + 1, t); }
};

// Throws std::invalid_argument if |w / (w + c)| > 1 at a grid time.
EmbeddedMasterEquation build_embedding(const PairedEquations& pair,
                                       const std::vector<double>& grid);

struct EmbeddedState {
  ComplexMatrix gamma;

  Index system_dim() const { return gamma.rows() / 2; }
  ComplexMatrix block(int i, int j) const;  // i, j in {0, 1}
};

// ((1 + sigma_1) / 2) kron rho: both blocks carry rho / 2.
EmbeddedState embed_state(const ComplexMatrix& rho);
// (1_2 / 2) kron rho.
EmbeddedState embed_state_diagonal(const ComplexMatrix& rho);

struct EmbeddedSeries {
  std::vector<double> times;
  std::vector<EmbeddedState> states;
  std::vector<double> c_integral;  // int_{t0}^{t} c, Simpson per step
};

EmbeddedSeries integrate_embedded(const EmbeddedMasterEquation& eme, const EmbeddedState& gamma0,
                                  double t0, double t1, double dt, long stride = 1);

struct ExtractedBlocks {
  ComplexMatrix rho_tilde;  // 2 gamma_11
  ComplexMatrix rho;        // exp(c_integral g) 2 gamma_12, Hermitized with gamma_21
};

// c_integral is int c ds; the rescaling uses exp(g * c_integral).
ExtractedBlocks extract_blocks(const EmbeddedState& gamma, double c_integral, double g);

struct CommutantCheck {
  double min_eigenvalue = 0.0;
  double max_singular_value = 0.0;
  bool psd = false;
  bool consistent = false;  // eigenvalue verdict agrees with sigma_max(T) <= 1
};

// Positivity of [[1_m kron 1_d, T kron 1_d], [T^dagger kron 1_d, 1_m kron 1_d]].
CommutantCheck commutant_embedding_psd(const ComplexMatrix& T, Index d);

}  // namespace cbu
