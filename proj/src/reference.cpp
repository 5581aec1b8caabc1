#include "mmflow/reference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mmflow {

namespace {

// Right-hand side of the method-of-lines system: du/dt = div(m(t, u) grad mu)
// with mu the shared first variation and zero-flux boundary faces.
std::vector<double> rhs(const Grid1D& g, const std::vector<double>& u, double t,
                        const EnergySpec& espec, const MobilitySpec& mspec) {
    DensityField uf;
    uf.grid   = g;
    uf.values = u;
    const std::vector<double> mu  = first_variation(espec, uf);
    const std::vector<double> gmu = grad_faces(g, mu);
    std::vector<double>       F(g.N + 1, 0.0);
    for (int j = 1; j < g.N; ++j) {
        const double uface = 0.5 * (u[j - 1] + u[j]);
        F[j]               = mspec.m(t, uface) * gmu[j];
    }
    return div_cells(g, F);
}

} // namespace

double stable_dt(const Grid1D& g, double gamma1, double m_sup, int order) {
    if (!(gamma1 > 0.0) || !(m_sup > 0.0))
        throw std::invalid_argument("reference: curvature and mobility bounds must be positive");
    if (order == 2) return 0.4 * g.dx * g.dx / (gamma1 * m_sup);
    if (order == 4) return 0.1 * g.dx * g.dx * g.dx * g.dx / (gamma1 * m_sup);
    throw std::invalid_argument("reference: order must be 2 or 4");
}

Trajectory reference_solve(const DensityField& u0, const EnergySpec& espec,
                           const MobilitySpec& mspec, double T, double dt,
                           const std::vector<double>& output_times, int order) {
    if (!(T > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("reference: horizon and step must be positive");
    const int expected_order = (espec.variant == EnergyVariant::E1) ? 2 : 4;
    if (order != expected_order)
        throw std::invalid_argument("reference: flux order does not match the energy class");
    for (size_t i = 0; i < output_times.size(); ++i) {
        if (output_times[i] < -1e-12 || output_times[i] > T + 1e-12)
            throw std::invalid_argument("reference: output times must lie in [0, T]");
        if (i > 0 && !(output_times[i] > output_times[i - 1]))
            throw std::invalid_argument("reference: output times must be ascending");
    }

    const Grid1D& g = u0.grid;
    Trajectory    tr;
    tr.grid    = g;
    tr.dt_used = dt;
    const double mass0 = mass(u0);

    std::vector<double> u = u0.values;
    double              t = 0.0;
    size_t              next_out = 0;

    auto record_if_due = [&]() {
        while (next_out < output_times.size() &&
               std::abs(t - output_times[next_out]) <= 1e-12 * std::max(1.0, T)) {
            DensityField f;
            f.grid   = g;
            f.values = u;
            tr.times.push_back(output_times[next_out]);
            tr.fields.push_back(std::move(f));
            double ms = 0.0;
            for (double v : u) ms += v;
            ms *= g.dx;
            tr.mass_drift = std::max(tr.mass_drift, std::abs(ms - mass0));
            ++next_out;
        }
    };
    record_if_due();

    std::vector<double> k1, k2, u_mid(u.size());
    while (t < T - 1e-14 * std::max(1.0, T)) {
        double step = dt;
        if (next_out < output_times.size())
            step = std::min(step, output_times[next_out] - t);
        step = std::min(step, T - t);
        if (!(step > 0.0)) break;

        // Heun: full Euler predictor, trapezoidal corrector.
        k1 = rhs(g, u, t, espec, mspec);
        for (size_t i = 0; i < u.size(); ++i) u_mid[i] = u[i] + step * k1[i];
        k2 = rhs(g, u_mid, t + step, espec, mspec);
        for (size_t i = 0; i < u.size(); ++i) u[i] += 0.5 * step * (k1[i] + k2[i]);
        t += step;

        for (size_t i = 0; i < u.size(); ++i) {
            const double v = u[i];
            if (!std::isfinite(v) || std::abs(v) > 1e9)
                throw std::runtime_error(
                    "reference: solution blew up at t = " + std::to_string(t) +
                    " (step too large for the explicit integrator)");
            tr.min_value_seen = std::min(tr.min_value_seen, v);
            if (v < -1e-6)
                throw std::runtime_error(
                    "reference: solution dropped below -1e-6 at t = " + std::to_string(t));
            if (v < 0.0) {
                ++tr.clip_count;
                tr.clip_total += -v;
                u[i] = 0.0;
            }
        }
        record_if_due();
    }
    record_if_due();
    return tr;
}

namespace {

void accumulate_errors(ErrorReport& rep, const Grid1D& g,
                       const std::vector<double>& a, const std::vector<double>& b,
                       double t) {
    double l1 = 0.0, l2 = 0.0, li = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        l1 += d;
        l2 += d * d;
        li = std::max(li, d);
    }
    rep.times.push_back(t);
    rep.l1.push_back(l1 * g.dx);
    rep.l2.push_back(std::sqrt(l2 * g.dx));
    rep.linf.push_back(li);
}

void finalize_aggregates(ErrorReport& rep, const Grid1D& g,
                         const std::vector<const std::vector<double>*>& refs) {
    double num = 0.0, den = 0.0;
    for (size_t k = 1; k < rep.times.size(); ++k) {
        const double dt = rep.times[k] - rep.times[k - 1];
        num += dt * rep.l2[k] * rep.l2[k];
        double nb = 0.0;
        for (double v : *refs[k]) nb += v * v;
        den += dt * nb * g.dx;
    }
    rep.aggregated_l2_in_time     = std::sqrt(num);
    rep.aggregated_rel_l2_in_time = (den > 0.0) ? std::sqrt(num / den) : 0.0;
}

} // namespace

ErrorReport compare_trajectories(const Trajectory& a, const Trajectory& b) {
    if (!a.grid.same_as(b.grid))
        throw std::invalid_argument("reference: trajectories live on different grids");
    ErrorReport rep;
    std::vector<const std::vector<double>*> refs;
    for (size_t k = 0; k < b.times.size(); ++k) {
        // Locate the matching output in `a`.
        size_t ja = a.times.size();
        for (size_t j = 0; j < a.times.size(); ++j)
            if (std::abs(a.times[j] - b.times[k]) <= 1e-10) { ja = j; break; }
        if (ja == a.times.size())
            throw std::invalid_argument("reference: trajectories have no common output at t = " +
                                        std::to_string(b.times[k]));
        accumulate_errors(rep, a.grid, a.fields[ja].values, b.fields[k].values, b.times[k]);
        refs.push_back(&b.fields[k].values);
    }
    finalize_aggregates(rep, a.grid, refs);
    return rep;
}

ErrorReport compare_solution_to_trajectory(const DiscreteSolution& sol,
                                           const Trajectory& ref) {
    if (!sol.grid.same_as(ref.grid))
        throw std::invalid_argument("reference: solution and trajectory live on different grids");
    ErrorReport rep;
    std::vector<const std::vector<double>*> refs;
    for (size_t k = 0; k < ref.times.size(); ++k) {
        const DensityField& u = sol.at_time(ref.times[k]);
        accumulate_errors(rep, sol.grid, u.values, ref.fields[k].values, ref.times[k]);
        refs.push_back(&ref.fields[k].values);
    }
    finalize_aggregates(rep, sol.grid, refs);
    return rep;
}

DensityField barenblatt_profile(const Grid1D& g, double t_prime, double center) {
    if (!(t_prime > 0.0))
        throw std::invalid_argument("reference: internal time must be positive");
    // Mass normalization: integral of t^{-1/3} (C - xi^2/(12 t^{2/3}))_+ dxi
    // equals (8/sqrt(3)) C^{3/2}, which is 1 for C = 3^{1/3}/4.
    const double C = std::cbrt(3.0) / 4.0;
    DensityField f;
    f.grid = g;
    f.values.assign(g.N, 0.0);
    const double t13 = std::cbrt(t_prime);
    for (int i = 0; i < g.N; ++i) {
        const double xi = g.cell_center(i) - center;
        const double v  = C - xi * xi / (12.0 * t13 * t13);
        f.values[i]     = (v > 0.0) ? v / t13 : 0.0;
    }
    return f;
}

} // namespace mmflow
