#pragma once

#include <string>
#include <vector>

#include "cbu/config.hpp"
#include "cbu/unraveling.hpp"

namespace cbu {

inline constexpr const char* kVersion = "0.1.0";

// %.17g, with "nan"/"inf" spelled consistently.
std::string format_number(double x);

struct RunResult {
  std::vector<std::string> files;  // paths written, in order
};

// Executes cfg.mode and writes CSV files into out_dir (created if missing).
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Dry run: parses the equation, samples the validation checks on the grid and
// checks that the requested pairing is admissible. Returns key=value lines.
// passed is set to the overall verdict.
std::string validation_report(const ExperimentConfig& cfg, bool& passed);

// Pairs the configured equation, padding the operator set first when it is not
// POVM-complete.
PairedEquations configured_pair(const ExperimentConfig& cfg, const CanonicalMasterEquation& me);

}  // namespace cbu
