// Independent method-of-lines oracle for the evolution equation
//     u_t = div[ m(t, u) grad(dE/du) ]
// with zero-flux boundary conditions: conservative face fluxes
// F = m(t, u_face) * (grad mu)_face with mu = first_variation(E, u), the
// face density by arithmetic mean, explicit Heun (RK2) time stepping.  The
// flux form conserves mass to rounding; everything is deliberately plain so
// the oracle is auditable line by line.

#pragma once

#include <vector>

#include "mmflow/energy.hpp"
#include "mmflow/grid.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/mobility.hpp"

namespace mmflow {

struct Trajectory {
    Grid1D              grid;
    std::vector<double> times;
    std::vector<DensityField> fields;
    double dt_used        = 0.0;
    double mass_drift     = 0.0; // max |mass - mass0| over outputs
    double min_value_seen = 0.0; // most negative cell value before clipping
    long   clip_count     = 0;   // cells clipped from (-1e-6, 0) to 0
    double clip_total     = 0.0; // total mass magnitude clipped
};

// Suggested stable step for the explicit integrator: c * dx^2 / (gamma1 *
// m_sup) for the second-order flux (order = 2, c = 0.4) and
// c * dx^4 / (gamma1 * m_sup) for the fourth-order flux (order = 4, c = 0.1;
// the quarter-power stencil bound needs the smaller constant).  m_sup must
// bound m(t, u) over the run.
double stable_dt(const Grid1D& g, double gamma1, double m_sup, int order);

// Integrates from u0 to horizon T with fixed step dt (the last step is
// shortened to land on T exactly) and records the field at `output_times`
// (each hit exactly by shortening steps).  `order` must match the energy
// class: 2 for E1, 4 for E2.  Aborts with a diagnostic when a cell drops
// below -1e-6 or the solution blows up (stability violation).
Trajectory reference_solve(const DensityField& u0, const EnergySpec& espec,
                           const MobilitySpec& mspec, double T, double dt,
                           const std::vector<double>& output_times, int order);

struct ErrorReport {
    std::vector<double> times;
    std::vector<double> l1, l2, linf;         // per common time
    double aggregated_l2_in_time     = 0.0;   // sqrt(sum dt ||a-b||_L2^2)
    double aggregated_rel_l2_in_time = 0.0;   // relative to the second argument
};

// Pointwise-in-time comparison at the times of `b` (the oracle).
ErrorReport compare_trajectories(const Trajectory& a, const Trajectory& b);

// Compares a minimizing-movement solution (piecewise-constant in time)
// against a reference trajectory at the reference output times.
ErrorReport compare_solution_to_trajectory(const DiscreteSolution& sol,
                                           const Trajectory& ref);

// Self-similar source solution of u_t = (u u_x)_x (= 1/2 (u^2)_xx), mass 1,
// centered at `center`, at internal time t_prime > 0:
//     u(x) = t'^{-1/3} max(C - (x-center)^2 / (12 t'^{2/3}), 0)
// with C = 3^{1/3}/4.  If u solves the equation with datum equal to this
// profile at internal time t0', then at time t it equals the profile at
// internal time t0' + t/2.  Valid while the support stays inside the domain.
DensityField barenblatt_profile(const Grid1D& g, double t_prime, double center);

} // namespace mmflow
