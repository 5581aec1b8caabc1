// Mobility-weighted transport distance in its dynamic form, discretized on
// a staggered space / inner-time grid: density layers rho^k live on cells
// (k = 0..K), momenta w^k on faces between consecutive layers (k = 0..K-1,
// boundary faces pinned to zero).  The squared distance is the minimum of
//   ds * dx * sum_{k, interior faces} w^2 / m(t, rho_bar)
// over paths satisfying the discrete continuity equation
//   (rho^{k+1} - rho^k)/ds + div w^k = 0,
// where rho_bar averages the four cell values adjacent to a (layer, face)
// slot.  With m concave the integrand is the perspective-type function
//   a(rho, w) = w^2/m(rho)  (0 if w = 0 and m = 0, +inf if w != 0, m = 0),
// jointly convex, so the whole program is convex.  The same engine solves
// the minimizing-movement step by leaving the terminal layer free and
// adding the energy of the endpoint to the objective.
//
// Solver: Chambolle-Pock primal-dual iteration.  The continuity + pinning
// constraints are handled by an exact projection (a Kronecker-sum normal
// matrix, factored once per problem shape and reused), the action and
// energy terms by per-slot proximal maps (1-D safeguarded Newton on the
// reduced perspective objective; exact banded solve for quadratic E2
// energies).  Termination: continuity residual below threshold (automatic
// after projection) plus relative objective stagnation over a window.

#pragma once

#include <memory>
#include <vector>

#include "mmflow/energy.hpp"
#include "mmflow/grid.hpp"
#include "mmflow/mobility.hpp"

namespace mmflow {

struct TransportPath {
    int    K  = 0;
    double ds = 0.0;
    // rho: K+1 layers of N cell values; w: K layers of N+1 face values.
    std::vector<std::vector<double>> rho;
    std::vector<std::vector<double>> w;
};

struct SolverStats {
    int    iterations          = 0;
    double continuity_residual = 0.0; // max abs residual of the discrete continuity equation
    double rel_obj_change      = 0.0; // over the termination window
    bool   converged           = false;
    double clamp_correction    = 0.0; // total mass moved by the final clamp of the endpoint
};

struct MetricResult {
    double        value = 0.0; // squared distance (or +inf when infeasible)
    bool          infeasible = false;
    TransportPath path;
    SolverStats   stats;
};

// Perspective-function action density with the 0/0 = 0 convention.
double action_value(const MobilitySpec& mspec, double t, double rho, double w);

// Squared mobility-weighted transport distance between two unit-mass fields with
// the mobility frozen at time t.  If S(t) is finite and either endpoint
// exceeds S(t) + 1e-8, the convention value is +inf (infeasible = true).
// K >= 2 inner steps; `tol` bounds the relative objective change over the
// 50-iteration termination window.  The reported value evaluates the action
// on the domain-rounded path: averaged densities clamped into [0, S] and
// slots whose mobility sits at dust level (1e-12 of the problem's mobility
// scale) skipped -- the minimizer parks w = 0 on such slots and iterates
// only reach that limit asymptotically.
MetricResult bb_distance_squared(const MobilitySpec& mspec, double t,
                                 const DensityField& u0, const DensityField& u1,
                                 int K, double tol, int max_iterations = 200000);

// Exact squared L2-Wasserstein distance between two unit-mass fields on a
// common grid, via piecewise-linear CDFs and exact quantile integration.
// Independent of the dynamic solver; used as its oracle for linear mobility.
double w2_squared_1d(const DensityField& u0, const DensityField& u1);

// ---------------------------------------------------------------------------
// Joint minimizing-movement step program (internal engine, used by jko).
// Minimizes  action/(2 tau) + E(rho^K)  over paths with rho^0 pinned and the
// terminal layer free but confined to [0, S(t)].
// ---------------------------------------------------------------------------

struct StepProgramResult {
    std::vector<double> endpoint; // rho^K after clamping + mass restoration
    double              action = 0.0; // ds*dx*sum w^2/m(t, rho_bar) along the path
    double              objective = 0.0; // action/(2 tau) + E(endpoint)
    SolverStats         stats;
    TransportPath       path; // filled when keep_path is requested
};

// Opaque warm-start / factorization cache carried across consecutive steps
// of one run.  Not thread-safe; use one workspace per run.
class TransportWorkspace;
// Out-of-line destruction because TransportWorkspace is incomplete here.
void destroy_transport_workspace(TransportWorkspace*);

struct TransportWorkspaceDeleter {
    void operator()(TransportWorkspace* p) const { destroy_transport_workspace(p); }
};
using TransportWorkspacePtr = std::unique_ptr<TransportWorkspace, TransportWorkspaceDeleter>;
TransportWorkspacePtr new_transport_workspace();

StepProgramResult solve_step_program(const MobilitySpec& mspec, double t,
                                     const EnergySpec& espec,
                                     const DensityField& u_prev, double tau,
                                     int K, double tol, int max_iterations,
                                     TransportWorkspace* ws, bool keep_path);

} // namespace mmflow
