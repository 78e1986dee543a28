#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbu/master_equation.hpp"
#include "cbu/operator_algebra.hpp"

namespace cbu {

// Parse or validation failure. line is 0 when the problem is not tied to a
// single line of the file.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message);

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

enum class Mode {
  integrate,
  unravel,
  pair,
  embed,
  recover_embedding,
  recover_martingale,
  spa_scan,
  reproduce_thermal_qubit,
};

std::string to_string(Mode m);

// Literal complex number: "1", "-0.5", "2i", "-i", "1.5-2e-3i".
Complex parse_complex(const std::string& text);
// Rows separated by ';', entries by ','.
ComplexMatrix parse_matrix(const std::string& text);

// Rate or coefficient expression: a sum of terms "[num *] atom" where atom is
// a number, const(a), sin(a, w, phi) = a sin(w t + phi) or
// table(t0:v0, t1:v1, ...) with linear interpolation, clamped at the ends.
RateProfile parse_profile(const std::string& text);

// sigma1, sigma2, sigma3, sigma_plus, sigma_minus, identity, gell_mann(k)
// (1-based, normalized so that Tr L^dagger L = 1) or matrix(...).
ComplexMatrix parse_operator(const std::string& text, Index dim);

struct TermSpec {
  std::string op;
  std::string coeff;  // profile expression
  int line = 0;
};

struct ModelSpec {
  std::string name;  // thermal_qubit, negative_rate_qubit, single_decay_qubit
  double g = 0.1;
  double beta = 1.0;
  double omega = 1.0;
  double drive = 3.0;
  double frequency = 15.0;
  double w = -0.2;
};

struct ExperimentConfig {
  Mode mode = Mode::integrate;
  Index dim = 2;
  double t0 = 0.0;
  double t1 = 1.0;
  double dt = 1e-3;
  long record_stride = 1;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string output = "out";
  std::size_t record_trajectories = 0;  // trajectories written to trajectories.csv

  std::optional<ModelSpec> model;
  std::vector<TermSpec> hamiltonian;
  std::vector<TermSpec> channels;  // op and rate
  std::optional<double> povm_constant;
  bool canonical = false;

  std::string initial_state = "excited";  // excited, ground, psi(...), matrix(...)
  std::string shift = "optimal";          // optimal or a profile expression

  std::vector<double> spa_times;
  std::vector<double> spa_dts{1e-3, 5e-4, 2.5e-4};
  std::vector<double> spa_factors{0.9, 1.0};

  Tolerances tolerances{};
  std::uint64_t hash = 0;  // FNV-1a of the file contents
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Master equation described by the config; the model preset takes precedence.
CanonicalMasterEquation build_equation(const ExperimentConfig& cfg);
ComplexMatrix build_initial_state(const ExperimentConfig& cfg);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace cbu
