#include "mmflow/jko.hpp"

#include <cmath>
#include <stdexcept>

namespace mmflow {

namespace {

StepMetrics metrics_from(const StepProgramResult& r, const DensityField& u,
                         const MobilitySpec& mspec, const EnergySpec& espec,
                         double t_n) {
    StepMetrics sm;
    sm.w2_sq               = r.action;
    sm.energy_after        = eval_energy(espec, u);
    sm.iterations          = r.stats.iterations;
    sm.continuity_residual = r.stats.continuity_residual;
    sm.converged           = r.stats.converged;
    sm.clamp_correction    = r.stats.clamp_correction;
    sm.mass_after          = mass(u);
    double H = 0.0;
    for (int i = 0; i < u.grid.N; ++i)
        H += heat_entropy_density(mspec, t_n, u.values[i]);
    sm.entropy_after = H * u.grid.dx;
    return sm;
}

} // namespace

const DensityField& DiscreteSolution::at_time(double t) const {
    // u(t) = u^{ceil(t/tau)}; the small slack keeps t = n tau on u^n.
    int n = static_cast<int>(std::ceil(t / tau - 1e-12));
    n     = std::max(0, std::min(n, static_cast<int>(fields.size()) - 1));
    return fields[static_cast<size_t>(n)];
}

std::pair<DensityField, StepMetrics> jko_step(const DensityField& u_prev, double t_n,
                                              const EnergySpec& espec,
                                              const MobilitySpec& mspec,
                                              const JkoConfig& cfg,
                                              TransportWorkspace* ws) {
    StepProgramResult r = solve_step_program(mspec, t_n, espec, u_prev, cfg.tau,
                                             cfg.K, cfg.tol, cfg.max_iterations,
                                             ws, /*keep_path=*/false);
    DensityField u;
    u.grid   = u_prev.grid;
    u.values = r.endpoint;
    return {u, metrics_from(r, u, mspec, espec, t_n)};
}

DiscreteSolution run_scheme(const DensityField& u0, const EnergySpec& espec,
                            const MobilitySpec& mspec, const JkoConfig& cfg) {
    if (!(cfg.tau > 0.0) || !(cfg.T > 0.0))
        throw std::invalid_argument("scheme: step length and horizon must be positive");
    const int n_steps = static_cast<int>(std::ceil(cfg.T / cfg.tau - 1e-12));

    DiscreteSolution sol;
    sol.grid = u0.grid;
    sol.tau  = cfg.tau;
    sol.times.push_back(0.0);
    sol.fields.push_back(u0);

    TransportWorkspacePtr ws = new_transport_workspace();
    for (int n = 1; n <= n_steps; ++n) {
        const double      t_n = n * cfg.tau;
        StepProgramResult r   = solve_step_program(mspec, t_n, espec, sol.fields.back(),
                                                   cfg.tau, cfg.K, cfg.tol,
                                                   cfg.max_iterations, ws.get(),
                                                   cfg.record_paths);
        DensityField u;
        u.grid   = sol.grid;
        u.values = r.endpoint;
        sol.step_metrics.push_back(metrics_from(r, u, mspec, espec, t_n));
        sol.times.push_back(t_n);
        sol.fields.push_back(std::move(u));
        if (cfg.record_paths) sol.paths.push_back(std::move(r.path));
    }
    return sol;
}

} // namespace mmflow
