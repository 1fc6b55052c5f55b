// Experiment drivers behind the command-line interface: each runs one named
// experiment from a validated configuration and writes its CSV/JSON artifacts
// into the output directory.  Exit codes: 0 success, 1 runtime failure,
// 2 model-condition failure.
#pragma once

#include "kgp/config.hpp"

namespace kgp {

inline constexpr const char* kVersionString = "kgparticle 0.1.0";

int run_experiment(const ExperimentConfig& config);

// 17-significant-digit decimal (round-trips doubles exactly).
std::string format_full(double v);

}  // namespace kgp
