#include "mmflow/energy.hpp"

#include <cmath>
#include <stdexcept>

namespace mmflow {

namespace {

std::function<double(double)> or_zero(std::function<double(double)> f) {
    if (f) return f;
    return [](double) { return 0.0; };
}

void check_gammas(double g0, double g1) {
    if (!(g0 > 0.0) || !(g1 >= g0))
        throw std::invalid_argument("energy: convexity bounds must satisfy 0 < gamma0 <= gamma1");
}

} // namespace

EnergySpec make_energy_quadratic_e1(std::function<double(double)> phi,
                                    std::function<double(double)> phi_dx) {
    EnergySpec sp;
    sp.variant = EnergyVariant::E1;
    sp.kind    = "quadratic_e1";
    sp.f       = [](double z) { return 0.5 * z * z; };
    sp.df      = [](double z) { return z; };
    sp.d2f     = [](double) { return 1.0; };
    sp.phi     = or_zero(std::move(phi));
    sp.phi_dx  = or_zero(std::move(phi_dx));
    sp.gamma0 = sp.gamma1 = 1.0;
    return sp;
}

EnergySpec make_energy_quadratic_gradient(std::function<double(double)> phi,
                                          std::function<double(double)> phi_dx) {
    EnergySpec sp;
    sp.variant = EnergyVariant::E2;
    sp.kind    = "quadratic_gradient";
    sp.f2      = [](double p, double z) { return 0.5 * (p * p + z * z); };
    sp.f2_p    = [](double p, double) { return p; };
    sp.f2_z    = [](double, double z) { return z; };
    sp.f2_pp   = [](double, double) { return 1.0; };
    sp.f2_pz   = [](double, double) { return 0.0; };
    sp.f2_zz   = [](double, double) { return 1.0; };
    sp.phi     = or_zero(std::move(phi));
    sp.phi_dx  = or_zero(std::move(phi_dx));
    sp.gamma0 = sp.gamma1 = 1.0;
    sp.e2_quadratic = true;
    sp.cpp = 1.0;
    sp.cpz = 0.0;
    sp.czz = 1.0;
    return sp;
}

EnergySpec make_energy_dirichlet(std::function<double(double)> phi,
                                 std::function<double(double)> phi_dx) {
    EnergySpec sp;
    sp.variant = EnergyVariant::E2;
    sp.kind    = "dirichlet";
    sp.f2      = [](double p, double) { return 0.5 * p * p; };
    sp.f2_p    = [](double p, double) { return p; };
    sp.f2_z    = [](double, double) { return 0.0; };
    sp.f2_pp   = [](double, double) { return 1.0; };
    sp.f2_pz   = [](double, double) { return 0.0; };
    sp.f2_zz   = [](double, double) { return 0.0; };
    sp.phi     = or_zero(std::move(phi));
    sp.phi_dx  = or_zero(std::move(phi_dx));
    sp.gamma0 = sp.gamma1 = 1.0; // p-block bounds
    sp.e2_quadratic  = true;
    sp.cpp           = 1.0;
    sp.cpz           = 0.0;
    sp.czz           = 0.0;
    sp.p_only_convex = true;
    return sp;
}

EnergySpec make_energy_custom_e1(std::function<double(double)> f,
                                 std::function<double(double)> df,
                                 std::function<double(double)> d2f,
                                 std::function<double(double)> phi,
                                 std::function<double(double)> phi_dx,
                                 double gamma0, double gamma1) {
    if (!f || !df || !d2f) throw std::invalid_argument("custom energy: missing evaluator");
    check_gammas(gamma0, gamma1);
    if (std::abs(f(0.0)) > 1e-12 || std::abs(df(0.0)) > 1e-12)
        throw std::invalid_argument("custom energy: f(0) = f'(0) = 0 required");
    EnergySpec sp;
    sp.variant = EnergyVariant::E1;
    sp.kind    = "custom_e1";
    sp.f       = std::move(f);
    sp.df      = std::move(df);
    sp.d2f     = std::move(d2f);
    sp.phi     = or_zero(std::move(phi));
    sp.phi_dx  = or_zero(std::move(phi_dx));
    sp.gamma0  = gamma0;
    sp.gamma1  = gamma1;
    return sp;
}

EnergySpec make_energy_custom_e2(std::function<double(double, double)> f2,
                                 std::function<double(double, double)> f2_p,
                                 std::function<double(double, double)> f2_z,
                                 std::function<double(double, double)> f2_pp,
                                 std::function<double(double, double)> f2_pz,
                                 std::function<double(double, double)> f2_zz,
                                 std::function<double(double)> phi,
                                 std::function<double(double)> phi_dx,
                                 double gamma0, double gamma1) {
    if (!f2 || !f2_p || !f2_z || !f2_pp || !f2_pz || !f2_zz)
        throw std::invalid_argument("custom energy: missing evaluator");
    check_gammas(gamma0, gamma1);
    EnergySpec sp;
    sp.variant = EnergyVariant::E2;
    sp.kind    = "custom_e2";
    sp.f2      = std::move(f2);
    sp.f2_p    = std::move(f2_p);
    sp.f2_z    = std::move(f2_z);
    sp.f2_pp   = std::move(f2_pp);
    sp.f2_pz   = std::move(f2_pz);
    sp.f2_zz   = std::move(f2_zz);
    sp.phi     = or_zero(std::move(phi));
    sp.phi_dx  = or_zero(std::move(phi_dx));
    sp.gamma0  = gamma0;
    sp.gamma1  = gamma1;
    return sp;
}

double eval_energy(const EnergySpec& espec, const DensityField& u) {
    const Grid1D& g = u.grid;
    double        acc = 0.0;
    if (espec.variant == EnergyVariant::E1) {
        for (int i = 0; i < g.N; ++i)
            acc += espec.f(u.values[i]) + espec.phi(g.cell_center(i)) * u.values[i];
    } else {
        const std::vector<double> gr = grad_faces(g, u.values);
        for (int i = 0; i < g.N; ++i) {
            const double pbar = 0.5 * (gr[i] + gr[i + 1]);
            acc += espec.f2(pbar, u.values[i]) + espec.phi(g.cell_center(i)) * u.values[i];
        }
    }
    return acc * g.dx;
}

std::vector<double> first_variation(const EnergySpec& espec, const DensityField& u) {
    const Grid1D&       g = u.grid;
    std::vector<double> mu(g.N, 0.0);
    if (espec.variant == EnergyVariant::E1) {
        for (int i = 0; i < g.N; ++i)
            mu[i] = espec.df(u.values[i]) + espec.phi(g.cell_center(i));
        return mu;
    }
    // Exact gradient of the midpoint discretization: the chain rule through
    // pbar_i = (g_i + g_{i+1})/2 collects f_p into a face field whose
    // divergence is taken with the same Neumann closure as grad_faces.
    const std::vector<double> gr = grad_faces(g, u.values);
    std::vector<double>       s(g.N, 0.0);
    for (int i = 0; i < g.N; ++i) s[i] = espec.f2_p(0.5 * (gr[i] + gr[i + 1]), u.values[i]);
    std::vector<double> qt(g.N + 1, 0.0);
    for (int j = 1; j < g.N; ++j) qt[j] = 0.5 * (s[j - 1] + s[j]);
    const std::vector<double> dq = div_cells(g, qt);
    for (int i = 0; i < g.N; ++i) {
        const double pbar = 0.5 * (gr[i] + gr[i + 1]);
        mu[i] = -dq[i] + espec.f2_z(pbar, u.values[i]) + espec.phi(g.cell_center(i));
    }
    return mu;
}

} // namespace mmflow
