// Free-energy functionals driving the evolution.  Two classes:
//   E1 (local):             E(u) = int f(u) + phi u dx,   f'' in [g0, g1]
//   E2 (gradient-carrying): E(u) = int f(u_x, u) + phi u dx,
//                           with the (p,z)-Hessian of f in [g0, g1]
// (for the Dirichlet variant only the p-block lower bound is required and
// the functional is meaningful on bounded domains only).  The module owns
// the single definition of the first variation dE/du shared by the
// minimizing-movement solver and the finite-volume reference solver.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmflow/grid.hpp"

namespace mmflow {

enum class EnergyVariant { E1, E2 };

struct EnergySpec {
    EnergyVariant variant = EnergyVariant::E1;
    // One of: quadratic_e1 | quadratic_gradient | dirichlet | custom_e1 | custom_e2.
    std::string kind;

    // E1 evaluators: f(z) with f(0) = f'(0) = 0 and f'' in [gamma0, gamma1].
    std::function<double(double)> f, df, d2f;

    // E2 evaluators: f(p, z), first and second partials.
    std::function<double(double, double)> f2, f2_p, f2_z, f2_pp, f2_pz, f2_zz;

    // Potential phi and its derivative, sampled at cell centers on use.
    std::function<double(double)> phi, phi_dx;

    // Declared convexity bounds, 0 < gamma0 <= gamma1.
    double gamma0 = 1.0, gamma1 = 1.0;

    // Set for builtin E2 kinds, which are quadratic forms
    // f(p, z) = cpp/2 p^2 + cpz p z + czz/2 z^2; enables an exact proximal
    // step inside the transport solver.
    bool   e2_quadratic = false;
    double cpp = 0.0, cpz = 0.0, czz = 0.0;

    // The Dirichlet variant is uniformly convex in p only; it is restricted
    // to bounded-domain runs (which is all this code implements) and flagged
    // so configuration-level checks can refuse it elsewhere.
    bool p_only_convex = false;
};

// f = z^2/2 (E1), with potential phi (and its derivative for diagnostics).
EnergySpec make_energy_quadratic_e1(std::function<double(double)> phi,
                                    std::function<double(double)> phi_dx);

// f = p^2/2 + z^2/2 (E2): Dirichlet part plus quadratic internal energy.
EnergySpec make_energy_quadratic_gradient(std::function<double(double)> phi,
                                          std::function<double(double)> phi_dx);

// f = p^2/2 (E2, p-only uniform convexity; bounded domains only).
EnergySpec make_energy_dirichlet(std::function<double(double)> phi,
                                 std::function<double(double)> phi_dx);

// Custom E1 energy from evaluators; gamma0 > 0 required, f(0) = f'(0) = 0
// probed at construction.
EnergySpec make_energy_custom_e1(std::function<double(double)> f,
                                 std::function<double(double)> df,
                                 std::function<double(double)> d2f,
                                 std::function<double(double)> phi,
                                 std::function<double(double)> phi_dx,
                                 double gamma0, double gamma1);

// Custom E2 energy from evaluators (full second-derivative bundle).
EnergySpec make_energy_custom_e2(std::function<double(double, double)> f2,
                                 std::function<double(double, double)> f2_p,
                                 std::function<double(double, double)> f2_z,
                                 std::function<double(double, double)> f2_pp,
                                 std::function<double(double, double)> f2_pz,
                                 std::function<double(double, double)> f2_zz,
                                 std::function<double(double)> phi,
                                 std::function<double(double)> phi_dx,
                                 double gamma0, double gamma1);

// Midpoint-rule value of the functional.  E2 evaluates f at
// (pbar_i, u_i) where pbar_i is the mean of the two adjacent Neumann-closed
// face gradients, so eval_energy and first_variation are exactly consistent.
double eval_energy(const EnergySpec& espec, const DensityField& u);

// Chemical potential mu = dE/du at cell centers.
//   E1: mu_i = f'(u_i) + phi_i.
//   E2: mu_i = -div(qtilde)_i + f_z(pbar_i, u_i) + phi_i with
//       qtilde the face field interpolated from s_i = f_p(pbar_i, u_i)
//       (boundary faces zero).  This is the exact gradient of the discrete
//       functional, so the finite-difference directional-derivative test
//       holds to rounding.
std::vector<double> first_variation(const EnergySpec& espec, const DensityField& u);

} // namespace mmflow
