// Executes a validated experiment configuration and writes the artifacts:
//   trajectory.csv   columns t, x, u          (RFC 4180, 17 significant digits)
//   metrics.csv      n, t, W2n_sq, energy, entropy, mass, moment, iters
//   diagnostics.json the full diagnostics report
//   summary.json     config echo + verdicts
// Output is deterministic: fixed iteration orders and no wall-clock content.

#pragma once

#include <string>

#include "mmflow/config.hpp"

namespace mmflow {

struct RunOutcome {
    int         exit_code = 0; // 0 iff the job completed and all hard checks passed
    std::string failure;       // empty on success
};

// `threads` bounds the number of concurrent runs inside a convergence study
// (each tau of the list is an independent run); other jobs are sequential.
RunOutcome execute(const ExperimentConfig& cfg, const std::string& out_dir,
                   int threads);

// CSV formatting helper shared with tests: shortest round-trip-exact decimal
// with at most 17 significant digits.
std::string format_double(double v);

} // namespace mmflow
