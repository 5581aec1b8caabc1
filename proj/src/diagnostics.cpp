#include "mmflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mmflow/transport.hpp"

namespace mmflow {

namespace {

// Smooth bump on (c - r, c + r), normalized to peak value 1:
//   B(x) = exp(1 - 1/(1 - s^2)),  s = (x - c)/r,
// with analytic first and second derivatives (zero outside the support).
struct Bump {
    double c = 0.0, r = 1.0;
    double value(double x) const {
        const double s = (x - c) / r;
        const double q = 1.0 - s * s;
        if (q <= 1e-14) return 0.0;
        return std::exp(1.0 - 1.0 / q);
    }
    double d1(double x) const {
        const double s = (x - c) / r;
        const double q = 1.0 - s * s;
        if (q <= 1e-14) return 0.0;
        const double g  = std::exp(1.0 - 1.0 / q);
        const double p1 = -2.0 * s / (q * q);
        return g * p1 / r;
    }
    double d2(double x) const {
        const double s = (x - c) / r;
        const double q = 1.0 - s * s;
        if (q <= 1e-14) return 0.0;
        const double g  = std::exp(1.0 - 1.0 / q);
        const double p1 = -2.0 * s / (q * q);
        const double p2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
        return g * (p1 * p1 + p2) / (r * r);
    }
};

TestFunctionPair make_cosine_pair(const std::string& name, double L, double T,
                                  int mode, double tc, double tr) {
    const double k = mode * 3.14159265358979323846 / L;
    Bump bt{tc * T, tr * T};
    TestFunctionPair tf;
    tf.name    = name;
    tf.eta     = [k](double x) { return std::cos(k * x); };
    tf.eta_dx  = [k](double x) { return -k * std::sin(k * x); };
    tf.eta_dxx = [k](double x) { return -k * k * std::cos(k * x); };
    tf.psi     = [bt](double t) { return bt.value(t); };
    return tf;
}

// Cubic smoothstep across the whole domain: eta = s^2 (3 - 2s), s = x / L.
// eta' vanishes at both walls, so the pair is compatible with the no-flux
// boundary while still weighing left and right halves differently (the
// residual tracks net rightward transport).
TestFunctionPair make_ramp_pair(const std::string& name, double L, double T,
                                double tc, double tr) {
    Bump bt{tc * T, tr * T};
    TestFunctionPair tf;
    tf.name   = name;
    tf.eta    = [L](double x) { const double s = x / L; return s * s * (3.0 - 2.0 * s); };
    tf.eta_dx = [L](double x) { const double s = x / L; return 6.0 * s * (1.0 - s) / L; };
    tf.eta_dxx = [L](double x) { const double s = x / L; return (6.0 - 12.0 * s) / (L * L); };
    tf.psi    = [bt](double t) { return bt.value(t); };
    return tf;
}

// Quintic gate: 0 left of a, 1 right of a + w, C^2 ramp in between.
// Localizes the transport measurement to the window [a, a + w].
TestFunctionPair make_gate_pair(const std::string& name, double L, double T,
                                double a_frac, double w_frac, double tc, double tr) {
    const double a = a_frac * L, w = w_frac * L;
    Bump bt{tc * T, tr * T};
    TestFunctionPair tf;
    tf.name = name;
    tf.eta  = [a, w](double x) {
        const double s = (x - a) / w;
        if (s <= 0.0) return 0.0;
        if (s >= 1.0) return 1.0;
        return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    };
    tf.eta_dx = [a, w](double x) {
        const double s = (x - a) / w;
        if (s <= 0.0 || s >= 1.0) return 0.0;
        return 30.0 * s * s * (1.0 - s) * (1.0 - s) / w;
    };
    tf.eta_dxx = [a, w](double x) {
        const double s = (x - a) / w;
        if (s <= 0.0 || s >= 1.0) return 0.0;
        return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (w * w);
    };
    tf.psi = [bt](double t) { return bt.value(t); };
    return tf;
}

} // namespace

std::vector<TestFunctionPair> builtin_test_pairs(double L, double T) {
    if (!(L > 0.0) || !(T > 0.0))
        throw std::invalid_argument("diagnostics: domain and horizon must be positive");
    std::vector<TestFunctionPair> out;
    out.push_back(make_ramp_pair("ramp", L, T, 0.55, 0.40));
    out.push_back(make_ramp_pair("ramp-late", L, T, 0.65, 0.30));
    out.push_back(make_cosine_pair("cosine", L, T, 1, 0.55, 0.40));
    out.push_back(make_gate_pair("gate", L, T, 0.28, 0.50, 0.55, 0.40));
    return out;
}

// ---------------------------------------------------------------------------
// Classical per-step estimates
// ---------------------------------------------------------------------------

ClassicalReport check_classical_estimates(const DiscreteSolution& sol,
                                          const EnergySpec& espec) {
    ClassicalReport rep;
    const int n_steps = sol.steps();
    if (n_steps == 0) return rep;

    std::vector<double> E(sol.fields.size());
    for (size_t n = 0; n < sol.fields.size(); ++n) E[n] = eval_energy(espec, sol.fields[n]);

    double e_min = E[0];
    rep.worst_margin = -std::numeric_limits<double>::infinity();
    rep.energy_monotone = true;
    const double tol_mono = 1e-8 * std::max(1.0, std::abs(E[0]));
    for (size_t n = 1; n < E.size(); ++n) {
        const double margin = E[n] - E[n - 1];
        rep.worst_margin    = std::max(rep.worst_margin, margin);
        if (margin > tol_mono && rep.first_violation < 0) {
            rep.first_violation = static_cast<int>(n);
            rep.energy_monotone = false;
        }
        e_min = std::min(e_min, E[n]);
    }

    for (const StepMetrics& sm : sol.step_metrics) rep.dist_sum += sm.w2_sq;
    rep.dist_bound = 2.0 * sol.tau * (E[0] - e_min);
    rep.dist_slack = rep.dist_bound - rep.dist_sum;

    // Time regularity through the exact quadratic transport distance: the
    // piecewise-constant interpolation obeys a square-root modulus with the
    // step length as the floor of the time gap.
    rep.c_hold        = 0.0;
    rep.pairs_checked = 0;
    for (size_t n = 0; n < sol.fields.size(); ++n) {
        for (size_t m = n + 1; m < sol.fields.size(); ++m) {
            const double w2 = std::sqrt(w2_squared_1d(sol.fields[n], sol.fields[m]));
            const double gap = std::max(sol.tau, sol.times[m] - sol.times[n]);
            rep.c_hold = std::max(rep.c_hold, w2 / std::sqrt(gap));
            ++rep.pairs_checked;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Entropy dissipation (flow interchange)
// ---------------------------------------------------------------------------

EntropyDissipationReport entropy_dissipation_check(const DiscreteSolution& sol,
                                                   const MobilitySpec& mspec,
                                                   const EnergySpec& espec) {
    EntropyDissipationReport rep;
    const Grid1D& g = sol.grid;
    const bool    e2 = espec.variant == EnergyVariant::E2;

    auto entropy_at = [&](const DensityField& u, double t) {
        double H = 0.0;
        for (int i = 0; i < g.N; ++i) H += heat_entropy_density(mspec, t, u.values[i]);
        return H * g.dx;
    };
    auto lhs_of = [&](const DensityField& u) {
        if (!e2) {
            const std::vector<double> w = grad_faces(g, u.values);
            double s = 0.0;
            for (double v : w) s += v * v;
            return sol.tau * s * g.dx;
        }
        const std::vector<double> lap = laplacian_neumann(g, u.values);
        double s = 0.0;
        for (double v : lap) s += v * v;
        return sol.tau * s * g.dx;
    };

    for (int n = 1; n <= sol.steps(); ++n) {
        const double t_n  = sol.times[static_cast<size_t>(n)];
        const double Hold = entropy_at(sol.fields[static_cast<size_t>(n - 1)], t_n);
        const double Hnew = entropy_at(sol.fields[static_cast<size_t>(n)], t_n);
        const double lhs  = lhs_of(sol.fields[static_cast<size_t>(n)]);
        rep.accumulated_lhs += lhs;
        const double bracket = Hold - Hnew + sol.tau;
        if (!(bracket > 1e-14)) {
            ++rep.skipped;
            continue;
        }
        const double c = lhs / bracket;
        rep.c_n.push_back(c);
        rep.c_max = std::max(rep.c_max, c);
    }
    if (!sol.fields.empty() && sol.steps() > 0) {
        rep.entropy_initial = entropy_at(sol.fields.front(), sol.times[1]);
        rep.entropy_final   = entropy_at(sol.fields.back(), sol.times.back());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Discrete weak-formulation residual
// ---------------------------------------------------------------------------

namespace {

enum class FluxCoding { expanded, trace };

double weak_residual_impl(const DiscreteSolution& sol, const EnergySpec& espec,
                          const MobilitySpec& mspec, const TestFunctionPair& tf,
                          FluxCoding coding) {
    const Grid1D& g  = sol.grid;
    const bool    e2 = espec.variant == EnergyVariant::E2;
    double        R  = 0.0;

    for (int n = 1; n <= sol.steps(); ++n) {
        const double t_n  = sol.times[static_cast<size_t>(n)];
        const double psin = tf.psi(t_n);
        const double psip = tf.psi(t_n + sol.tau);
        const DensityField& u = sol.fields[static_cast<size_t>(n)];

        double pairing = 0.0;
        for (int i = 0; i < g.N; ++i) pairing += u.values[i] * tf.eta(g.cell_center(i));
        pairing *= g.dx;

        double flux = 0.0;
        if (psin != 0.0) {
            const std::vector<double> ux = cell_gradient(g, u.values);
            std::vector<double>       uxx;
            if (e2) uxx = laplacian_neumann(g, u.values);
            for (int i = 0; i < g.N; ++i) {
                const double x  = g.cell_center(i);
                const double z  = u.values[i];
                const double mm = mspec.m(t_n, z);
                const double ex = tf.eta_dx(x);
                if (!e2) {
                    flux += mm * (espec.d2f(z) * ux[i] + espec.phi_dx(x)) * ex;
                } else {
                    const double q    = mm * ex;
                    const double divq = mspec.dm(t_n, z) * ux[i] * ex +
                                        mm * tf.eta_dxx(x);
                    const double fpp = espec.f2_pp(ux[i], z);
                    const double fpz = espec.f2_pz(ux[i], z);
                    const double fzz = espec.f2_zz(ux[i], z);
                    if (coding == FluxCoding::expanded) {
                        flux += q * espec.phi_dx(x) + divq * (fpp * uxx[i] + fpz * ux[i]) +
                                q * (fpz * uxx[i] + fzz * ux[i]);
                    } else {
                        // Same bracket through the 2x2 Hessian sandwich
                        // (div q, q) . Hess f . (u_xx, u_x).
                        const double v1[2] = {divq, q};
                        const double v2[2] = {uxx[i], ux[i]};
                        const double Hv2[2] = {fpp * v2[0] + fpz * v2[1],
                                               fpz * v2[0] + fzz * v2[1]};
                        flux += q * espec.phi_dx(x) + v1[0] * Hv2[0] + v1[1] * Hv2[1];
                    }
                }
            }
            flux *= g.dx;
        }
        R += sol.tau * ((psin - psip) / sol.tau * pairing + psin * flux);
    }
    return R;
}

} // namespace

double weak_residual_signed(const DiscreteSolution& sol, const EnergySpec& espec,
                            const MobilitySpec& mspec, const TestFunctionPair& tf) {
    return weak_residual_impl(sol, espec, mspec, tf, FluxCoding::expanded);
}

double weak_residual(const DiscreteSolution& sol, const EnergySpec& espec,
                     const MobilitySpec& mspec, const TestFunctionPair& tf) {
    return std::abs(weak_residual_signed(sol, espec, mspec, tf));
}

double weak_residual_signed_trace_form(const DiscreteSolution& sol,
                                       const EnergySpec& espec,
                                       const MobilitySpec& mspec,
                                       const TestFunctionPair& tf) {
    return weak_residual_impl(sol, espec, mspec, tf, FluxCoding::trace);
}

// ---------------------------------------------------------------------------
// A-priori norm bounds
// ---------------------------------------------------------------------------

AprioriReport apriori_bounds(const DiscreteSolution& sol, const EnergySpec& espec) {
    AprioriReport rep;
    const Grid1D& g  = sol.grid;
    const bool    e2 = espec.variant == EnergyVariant::E2;
    bool          ok = true;

    for (size_t n = 0; n < sol.fields.size(); ++n) {
        const std::vector<double>& u = sol.fields[n].values;
        const double l2 = l2_norm(g, u);
        rep.sup_l2 = std::max(rep.sup_l2, l2);
        const std::vector<double> w = grad_faces(g, u);
        double gn = 0.0;
        for (double v : w) gn += v * v;
        gn *= g.dx;
        rep.sup_h1     = std::max(rep.sup_h1, std::sqrt(l2 * l2 + gn));
        rep.sup_moment = std::max(rep.sup_moment, second_moment(sol.fields[n]));
        if (n >= 1) {
            if (!e2) {
                rep.accumulated += sol.tau * gn;
            } else {
                const std::vector<double> lap = laplacian_neumann(g, u);
                double ln = 0.0;
                for (double v : lap) ln += v * v;
                rep.accumulated += sol.tau * ln * g.dx;
            }
        }
        ok = ok && std::isfinite(l2) && std::isfinite(gn);
    }
    rep.all_finite = ok && std::isfinite(rep.accumulated) && std::isfinite(rep.sup_moment);
    return rep;
}

} // namespace mmflow
