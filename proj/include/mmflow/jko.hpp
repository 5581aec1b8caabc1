// Minimizing-movement time discretization: given u^{n-1}, the next iterate
// minimizes
//     W_{m(n tau, .)}(u^{n-1}, u)^2 / (2 tau) + E(u)
// with the mobility frozen at the *end* time n tau of the step (not at
// (n-1) tau and not averaged).  The discrete solution is the
// piecewise-constant interpolation u(t) = u^{ceil(t/tau)}.

#pragma once

#include <vector>

#include "mmflow/energy.hpp"
#include "mmflow/grid.hpp"
#include "mmflow/mobility.hpp"
#include "mmflow/transport.hpp"

namespace mmflow {

struct JkoConfig {
    double tau            = 1e-3;
    double T              = 0.1;
    int    K              = 16;   // inner transport layers per step
    double tol            = 1e-8; // relative objective stagnation threshold
    int    max_iterations = 200000;
    bool   record_paths   = false;
};

struct StepMetrics {
    double w2_sq               = 0.0; // transport action of the step
    double energy_after        = 0.0;
    double entropy_after       = 0.0; // heat entropy at the frozen time n tau
    int    iterations          = 0;
    double continuity_residual = 0.0;
    bool   converged           = false;
    double clamp_correction    = 0.0;
    double mass_after          = 0.0;
};

struct DiscreteSolution {
    Grid1D              grid;
    double              tau = 0.0;
    std::vector<double> times;              // n tau, n = 0..N
    std::vector<DensityField> fields;       // u^0..u^N
    std::vector<StepMetrics>  step_metrics; // one per step n = 1..N
    std::vector<TransportPath> paths;       // optional (record_paths)

    int steps() const { return static_cast<int>(step_metrics.size()); }

    // Piecewise-constant interpolation u(t) = u^{ceil(t/tau)} (clamped to
    // the last iterate beyond the horizon).
    const DensityField& at_time(double t) const;
};

// One step of the scheme at end time t_n = previous time + tau.  Throws if
// u_prev is not unit mass or exceeds S(t_n) beyond tolerance.  `ws` carries
// warm starts and cached factorizations across consecutive calls (pass
// nullptr for a cold one-shot step).
std::pair<DensityField, StepMetrics> jko_step(const DensityField& u_prev, double t_n,
                                              const EnergySpec& espec,
                                              const MobilitySpec& mspec,
                                              const JkoConfig& cfg,
                                              TransportWorkspace* ws);

// Runs ceil(T/tau) steps from u0 and collects all per-step metrics.
DiscreteSolution run_scheme(const DensityField& u0, const EnergySpec& espec,
                            const MobilitySpec& mspec, const JkoConfig& cfg);

} // namespace mmflow
