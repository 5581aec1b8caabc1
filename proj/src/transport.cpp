#include "mmflow/transport.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace mmflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Fixed-time view of the mobility (the step program freezes t).
struct Mob {
    const MobilitySpec* s = nullptr;
    double t = 0.0;
    double m(double z) const { return s->m(t, z); }
    double dm(double z) const { return s->dm(t, z); }
    double d2m(double z) const { return s->d2m(t, z); }
};

// ---------------------------------------------------------------------------
// Scalar proximal subproblems
// ---------------------------------------------------------------------------

// After minimizing the perspective term w^2/m over w with the quadratic
// penalty, the remaining 1-D problem in the averaged density a is
//   G(a) = (a - ahat)^2/2 + lc * bhat2 / (m(a) + 2 lc),
// convex on [0, hi] for concave m.  Safeguarded Newton with warm start;
// `hi` may be +inf (bracket found by doubling).
double perspective_argmin(const Mob& mob, double ahat, double bhat2, double lc,
                          double hi, double warm) {
    auto dG = [&](double a) -> double {
        const double mm  = mob.m(a);
        const double md  = mob.dm(a);
        const double den = mm + 2.0 * lc;
        if (!std::isfinite(md)) return -kInf; // infinite slope only at the degenerate edge
        return (a - ahat) - lc * bhat2 * md / (den * den);
    };
    auto d2G = [&](double a) -> double {
        const double mm  = mob.m(a);
        const double md  = mob.dm(a);
        const double m2  = mob.d2m(a);
        const double den = mm + 2.0 * lc;
        if (!std::isfinite(md) || !std::isfinite(m2)) return 1.0;
        return 1.0 + lc * bhat2 * (2.0 * md * md - m2 * den) / (den * den * den);
    };

    double lo = 0.0;
    double hb = hi;
    if (!std::isfinite(hb)) {
        hb = std::max({1.0, ahat, warm});
        while (dG(hb) < 0.0 && hb < 1e14) hb *= 2.0;
    }
    if (dG(lo) >= 0.0) return lo;
    if (dG(hb) <= 0.0) return hb;

    double a = std::clamp(warm, lo + 1e-15 * (hb - lo), hb - 1e-15 * (hb - lo));
    const double scale = std::max(1.0, std::abs(ahat));
    for (int it = 0; it < 80; ++it) {
        const double g1 = dG(a);
        if (g1 > 0.0) hb = a;
        else lo = a;
        if (std::abs(g1) < 1e-13 * scale || (hb - lo) < 1e-15 * std::max(1.0, hb)) break;
        const double g2 = d2G(a);
        double an = (std::isfinite(g1) && g2 > 1e-14) ? a - g1 / g2 : 0.5 * (lo + hb);
        if (!(an > lo && an < hb)) an = 0.5 * (lo + hb);
        a = an;
    }
    return a;
}

// argmin over v in [0, Scap] of (v - vhat)^2/2 + le (f(v) + phi_i v): the
// per-cell proximal map of a local energy density (f convex, so the
// derivative is increasing and bracketed Newton is safe).
double scalar_energy_prox(const EnergySpec& es, double vhat, double le, double phi_i,
                          double Scap) {
    auto D = [&](double v) { return v - vhat + le * (es.df(v) + phi_i); };
    if (D(0.0) >= 0.0) return 0.0;
    double hb = Scap;
    if (!std::isfinite(hb)) {
        hb = std::max(1.0, vhat);
        while (D(hb) < 0.0 && hb < 1e14) hb *= 2.0;
    } else if (D(hb) <= 0.0) {
        return hb;
    }
    double lo = 0.0, v = std::clamp(vhat, lo, hb);
    for (int it = 0; it < 60; ++it) {
        const double g1 = D(v);
        if (g1 > 0.0) hb = v;
        else lo = v;
        if (std::abs(g1) < 1e-14 * std::max(1.0, std::abs(vhat)) ||
            (hb - lo) < 1e-16 * std::max(1.0, hb))
            break;
        const double g2 = 1.0 + le * es.d2f(v);
        double vn = (g2 > 1e-14) ? v - g1 / g2 : 0.5 * (lo + hb);
        if (!(vn > lo && vn < hb)) vn = 0.5 * (lo + hb);
        v = vn;
    }
    return v;
}

// Per-cell pair prox for gradient-carrying energies: minimize
//   (p - ph)^2/2 + (z - zh)^2/2 + le (f(p/th, z) + phi_i z),  z in [0, Scap],
// where th is the scaling applied to the gradient rows of the operator.
// Quadratic densities solve the 2x2 system exactly (with the box activated
// by a KKT case split); general densities use a projected Newton.
void pair_energy_prox(const EnergySpec& es, double ph, double zh, double le,
                      double phi_i, double th, double Scap, double& p, double& z) {
    if (es.e2_quadratic) {
        const double a11 = 1.0 + le * es.cpp / (th * th);
        const double a12 = le * es.cpz / th;
        const double a22 = 1.0 + le * es.czz;
        const double r1 = ph, r2 = zh - le * phi_i;
        const double det = a11 * a22 - a12 * a12;
        z = (a11 * r2 - a12 * r1) / det;
        if (z < 0.0) z = 0.0;
        else if (z > Scap) z = Scap;
        p = (r1 - a12 * z) / a11;
        return;
    }
    p = ph;
    z = std::max(0.0, std::min(zh, Scap));
    for (int it = 0; it < 60; ++it) {
        const double q  = p / th;
        const double g1 = p - ph + (le / th) * es.f2_p(q, z);
        const double g2 = z - zh + le * (es.f2_z(q, z) + phi_i);
        const double h11 = 1.0 + (le / (th * th)) * es.f2_pp(q, z);
        const double h12 = (le / th) * es.f2_pz(q, z);
        const double h22 = 1.0 + le * es.f2_zz(q, z);
        const bool active = (z <= 0.0 && g2 > 0.0) || (z >= Scap && g2 < 0.0);
        double dp, dz;
        if (active) {
            dz = 0.0;
            dp = -g1 / h11;
        } else {
            const double det = h11 * h22 - h12 * h12;
            dp = -(h22 * g1 - h12 * g2) / det;
            dz = -(h11 * g2 - h12 * g1) / det;
        }
        p += dp;
        z = std::max(0.0, std::min(z + dz, Scap));
        if (std::abs(dp) + std::abs(dz) <
            1e-13 * std::max(1.0, std::abs(ph) + std::abs(zh)))
            break;
    }
}

// ---------------------------------------------------------------------------
// Primal-dual core
// ---------------------------------------------------------------------------

struct CpSetup {
    int    N = 0, K = 0;
    double dx = 0.0, ds = 0.0;
    bool   dist = false; // both endpoints pinned (distance mode)
    Mob    mob;
    double Scap = kInf;  // S at the frozen time
    double tau  = 1.0;   // step length (JKO mode)
    const EnergySpec* espec = nullptr; // JKO mode only
    std::vector<double> rho0, rhoK;    // pinned layers (rhoK in distance mode)
    std::vector<double> phi_c;         // potential at cell centers (JKO)
    double E_prev = 0.0;               // energy of the pinned start (descent gate)
    Grid1D grid;
    double theta = 1.0; // scaling of the gradient rows (set to dx for E2)
};

} // namespace

// Opaque cache: constraint factorization keyed by the problem shape, plus
// the previous primal/dual state for warm starts across consecutive steps.
class TransportWorkspace {
public:
    int  N = -1, K = -1;
    bool dist = false;
    int  n_y  = -1;
    Eigen::SparseMatrix<double> A, At;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> fact;
    bool fact_ready = false;

    bool have_prev = false;
    Eigen::VectorXd x, y, alpha;
    std::vector<double> rho0_prev;
    double sigma = 0.0, taubar = 0.0;
};

void destroy_transport_workspace(TransportWorkspace* p) { delete p; }

TransportWorkspacePtr new_transport_workspace() {
    return TransportWorkspacePtr(new TransportWorkspace());
}

namespace {

StepProgramResult run_cp(const CpSetup& su, double tol, int max_iterations,
                         TransportWorkspace* ws, bool keep_path) {
    const int    N = su.N, K = su.K;
    const double dx = su.dx, ds = su.ds;
    const bool   dist = su.dist;
    const int    n_rho_layers = dist ? K - 1 : K; // free layers 1..n_rho_layers
    const int    n_rho = n_rho_layers * N;
    const int    n_w   = K * (N - 1);
    const int    n_x   = n_rho + n_w;
    const int    n_slots = K * (N - 1);
    const bool   e2 = su.espec && su.espec->variant == EnergyVariant::E2;
    const int    n_energy = dist ? 0 : (e2 ? 2 * N : N);
    const int    n_y = 2 * n_slots + n_energy;
    const int    offB = n_slots, offE = 2 * n_slots;
    const double lambda1 = dist ? ds * dx : ds * dx / (2.0 * su.tau);

    auto rvar = [N](int k, int i) { return (k - 1) * N + i; };          // k in [1, n_rho_layers]
    auto wvar = [N, n_rho](int k, int j) { return n_rho + k * (N - 1) + (j - 1); }; // j in [1, N-1]

    // Per-slot neighbor tables: the averaged density at interface k, face j
    // mixes rho^k and rho^{k+1} at cells j-1 and j; pinned layers contribute
    // a constant offset instead of an operator entry.
    std::vector<std::array<int, 4>> slot_idx(n_slots);
    std::vector<double>             slot_const(n_slots, 0.0);
    std::vector<int>                slot_w(n_slots, 0);
    {
        int sidx = 0;
        for (int k = 0; k < K; ++k) {
            for (int j = 1; j < N; ++j, ++sidx) {
                int    nn = 0;
                double cc = 0.0;
                std::array<int, 4> ids{-1, -1, -1, -1};
                for (int kk : {k, k + 1}) {
                    for (int ii : {j - 1, j}) {
                        if (kk == 0) cc += su.rho0[ii];
                        else if (dist && kk == K) cc += su.rhoK[ii];
                        else ids[nn++] = rvar(kk, ii);
                    }
                }
                slot_idx[sidx]   = ids;
                slot_const[sidx] = 0.25 * cc;
                slot_w[sidx]     = wvar(k, j);
            }
        }
    }

    auto applyL = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
        for (int s = 0; s < n_slots; ++s) {
            double acc = 0.0;
            for (int q = 0; q < 4; ++q)
                if (slot_idx[s][q] >= 0) acc += x[slot_idx[s][q]];
            y[s]        = 0.25 * acc;
            y[offB + s] = x[slot_w[s]];
        }
        if (!dist) {
            const int base = rvar(K, 0);
            if (e2) {
                const double th = su.theta / (2.0 * dx); // theta * cellgrad weights
                y[offE] = th * (x[base + 1] - x[base]);
                for (int i = 1; i < N - 1; ++i)
                    y[offE + i] = th * (x[base + i + 1] - x[base + i - 1]);
                y[offE + N - 1] = th * (x[base + N - 1] - x[base + N - 2]);
                for (int i = 0; i < N; ++i) y[offE + N + i] = x[base + i];
            } else {
                for (int i = 0; i < N; ++i) y[offE + i] = x[base + i];
            }
        }
    };

    auto applyLT = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
        g.setZero();
        for (int s = 0; s < n_slots; ++s) {
            const double ya = 0.25 * y[s];
            for (int q = 0; q < 4; ++q)
                if (slot_idx[s][q] >= 0) g[slot_idx[s][q]] += ya;
            g[slot_w[s]] += y[offB + s];
        }
        if (!dist) {
            const int base = rvar(K, 0);
            if (e2) {
                const double th = su.theta / (2.0 * dx);
                g[base] -= th * y[offE];
                g[base + 1] += th * y[offE];
                for (int i = 1; i < N - 1; ++i) {
                    g[base + i - 1] -= th * y[offE + i];
                    g[base + i + 1] += th * y[offE + i];
                }
                g[base + N - 2] -= th * y[offE + N - 1];
                g[base + N - 1] += th * y[offE + N - 1];
                for (int i = 0; i < N; ++i) g[base + i] += y[offE + N + i];
            } else {
                for (int i = 0; i < N; ++i) g[base + i] += y[offE + i];
            }
        }
    };

    // Constraint rows (continuity per interface and cell); in distance mode
    // the rows sum to zero across the whole grid, so the last row is
    // redundant and dropped to keep the normal matrix nonsingular.
    const int n_rows = K * N - (dist ? 1 : 0);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_rows);

    TransportWorkspace  local_ws;
    TransportWorkspace& W = ws ? *ws : local_ws;
    const bool shape_ok = (W.N == N && W.K == K && W.dist == dist && W.fact_ready);
    if (!shape_ok) {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<size_t>(n_rows) * 4);
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i < N; ++i) {
                const int row = k * N + i;
                if (row >= n_rows) continue;
                if (!(dist && k + 1 == K)) trip.emplace_back(row, rvar(k + 1, i), 1.0 / ds);
                if (k >= 1) trip.emplace_back(row, rvar(k, i), -1.0 / ds);
                if (i + 1 <= N - 1) trip.emplace_back(row, wvar(k, i + 1), 1.0 / dx);
                if (i >= 1) trip.emplace_back(row, wvar(k, i), -1.0 / dx);
            }
        }
        W.A.resize(n_rows, n_x);
        W.A.setFromTriplets(trip.begin(), trip.end());
        W.At = W.A.transpose();
        Eigen::SparseMatrix<double> AAT = (W.A * W.At).pruned();
        W.fact.compute(AAT);
        if (W.fact.info() != Eigen::Success)
            throw std::runtime_error("transport: factorization of the constraint normal matrix failed");
        W.N = N;
        W.K = K;
        W.dist = dist;
        W.n_y = n_y;
        W.fact_ready = true;
        W.have_prev  = false;
    }
    if (W.n_y != n_y) W.have_prev = false; // energy block shape changed
    W.n_y = n_y;

    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < N; ++i) {
            const int row = k * N + i;
            if (row >= n_rows) continue;
            if (k == 0) b[row] += su.rho0[i] / ds;
            if (dist && k + 1 == K) b[row] -= su.rhoK[i] / ds;
        }
    }

    auto project = [&](Eigen::VectorXd& z) {
        Eigen::VectorXd r = W.A * z - b;
        z.noalias() -= W.At * W.fact.solve(r);
    };

    // --- initial point ------------------------------------------------------
    Eigen::VectorXd x(n_x), y(n_y), alpha(n_slots);
    if (!dist && W.have_prev && static_cast<int>(W.rho0_prev.size()) == N) {
        x = W.x;
        y = W.y;
        alpha = W.alpha;
        // Translate the remembered path so its pinned layer matches the new
        // start; continuity is invariant under per-cell translations.
        for (int i = 0; i < N; ++i) {
            const double d = su.rho0[i] - W.rho0_prev[i];
            for (int k = 1; k <= n_rho_layers; ++k) x[rvar(k, i)] += d;
        }
        int sidx = 0;
        for (int k = 0; k < K; ++k)
            for (int j = 1; j < N; ++j, ++sidx)
                alpha[sidx] += 0.5 * (su.rho0[j - 1] - W.rho0_prev[j - 1] +
                                      su.rho0[j] - W.rho0_prev[j]);
    } else if (dist) {
        // Linear density interpolation with the compatible momentum obtained
        // by integrating the continuity equation from the left wall.
        for (int k = 1; k <= n_rho_layers; ++k) {
            const double th = static_cast<double>(k) / K;
            for (int i = 0; i < N; ++i)
                x[rvar(k, i)] = (1.0 - th) * su.rho0[i] + th * su.rhoK[i];
        }
        for (int k = 0; k < K; ++k) {
            double wface = 0.0;
            for (int j = 1; j < N; ++j) {
                wface -= dx * (su.rhoK[j - 1] - su.rho0[j - 1]); // (rho^{k+1}-rho^k)/ds = (u1-u0)
                x[wvar(k, j)] = wface;
            }
        }
        y.setZero();
        int sidx = 0;
        for (int k = 0; k < K; ++k)
            for (int j = 1; j < N; ++j, ++sidx) {
                double acc = slot_const[sidx];
                for (int q = 0; q < 4; ++q)
                    if (slot_idx[sidx][q] >= 0) acc += 0.25 * x[slot_idx[sidx][q]];
                alpha[sidx] = acc;
            }
    } else {
        // Constant path: trivially feasible, objective equals E(u_prev).
        for (int k = 1; k <= n_rho_layers; ++k)
            for (int i = 0; i < N; ++i) x[rvar(k, i)] = su.rho0[i];
        for (int k = 0; k < K; ++k)
            for (int j = 1; j < N; ++j) x[wvar(k, j)] = 0.0;
        y.setZero();
        for (int s = 0; s < n_slots; ++s) {
            double acc = slot_const[s];
            for (int q = 0; q < 4; ++q)
                if (slot_idx[s][q] >= 0) acc += 0.25 * x[slot_idx[s][q]];
            alpha[s] = acc;
        }
    }
    project(x);

    // --- operator norm and step sizes --------------------------------------
    double Lnorm2;
    {
        Eigen::VectorXd v(n_x), u(n_y);
        for (int i = 0; i < n_x; ++i) v[i] = 1.0 + std::sin(0.7 * i);
        double est = 1.0;
        for (int it = 0; it < 60; ++it) {
            v /= v.norm();
            applyL(v, u);
            applyLT(u, v);
            est = v.norm(); // = ||L^T L v|| with unit input: converges to ||L||^2
        }
        Lnorm2 = 1.05 * est;
    }
    double sigma, taubar;
    if (!dist && W.have_prev && W.sigma > 0.0) {
        sigma  = W.sigma;
        taubar = W.taubar;
    } else {
        sigma = taubar = std::sqrt(0.90 / Lnorm2);
    }

    // --- objective ----------------------------------------------------------
    // Evaluated on the domain-rounded iterate: the averaged density is
    // clamped into [0, S] and slots whose mobility falls below a dust floor
    // are skipped.  Iterates satisfy the constraints only asymptotically, so
    // momentum dust of size ~1e-9 keeps leaking into cells of (near) zero
    // density; the exact minimizer parks w = 0 there and the strict
    // perspective value of such a slot is an artifact of the dust, not of
    // the path.  Infeasibility of the endpoints themselves is detected
    // before the solver runs.
    double m_scale = 1e-300;
    for (int i = 0; i < N; ++i) {
        m_scale = std::max(m_scale, su.mob.m(std::clamp(su.rho0[i], 0.0, su.Scap)));
        if (dist) m_scale = std::max(m_scale, su.mob.m(std::clamp(su.rhoK[i], 0.0, su.Scap)));
    }
    if (std::isfinite(su.Scap)) m_scale = std::max(m_scale, su.mob.m(0.5 * su.Scap));
    const double m_dust = 1e-12 * m_scale;
    DensityField scratch;
    scratch.grid = su.grid;
    scratch.values.assign(N, 0.0);
    auto action_of = [&](const Eigen::VectorXd& xv) -> double {
        double acc = 0.0;
        for (int s = 0; s < n_slots; ++s) {
            const double wv = xv[slot_w[s]];
            double abar = slot_const[s];
            for (int q = 0; q < 4; ++q)
                if (slot_idx[s][q] >= 0) abar += 0.25 * xv[slot_idx[s][q]];
            const double az = std::clamp(abar, 0.0, su.Scap);
            const double mm = su.mob.m(az);
            if (mm <= m_dust) continue;
            acc += wv * wv / mm;
        }
        return ds * dx * acc;
    };
    auto objective_of = [&](const Eigen::VectorXd& xv) -> double {
        const double act = action_of(xv);
        if (dist) return act;
        for (int i = 0; i < N; ++i) scratch.values[i] = xv[rvar(K, i)];
        return act / (2.0 * su.tau) + eval_energy(*su.espec, scratch);
    };

    // --- main loop ----------------------------------------------------------
    Eigen::VectorXd xbar = x, xnew(n_x), grad(n_x), Lx(n_y), v(n_y);
    Eigen::VectorXd x_pre(n_x), y_pre(n_y);
    std::vector<double> hist;
    hist.reserve(2048);
    SolverStats stats;
    const int window = 50;
    const double descent_gate = su.E_prev + 1e-10 * std::max(1.0, std::abs(su.E_prev));
    int  it = 0;
    bool converged = false;
    double rel = kInf;

    for (it = 0; it < max_iterations; ++it) {
        const bool adapt_now = (it % 32 == 31) && it < 4000;
        if (adapt_now) {
            x_pre = x;
            y_pre = y;
        }

        applyL(xbar, Lx);
        v = y + sigma * Lx;

        // Dual prox, block by block (Moreau decomposition per slot).
        for (int s = 0; s < n_slots; ++s) {
            const double va = v[s], vb = v[offB + s];
            const double ahat = va / sigma + slot_const[s];
            const double bhat = vb / sigma;
            const double lc   = lambda1 / sigma;
            double astar, bstar;
            if (bhat == 0.0) {
                astar = std::clamp(ahat, 0.0, su.Scap);
                bstar = 0.0;
            } else {
                astar = perspective_argmin(su.mob, ahat, bhat * bhat, lc, su.Scap,
                                           alpha[s]);
                const double mm = su.mob.m(astar);
                bstar = bhat * mm / (mm + 2.0 * lc);
            }
            alpha[s]    = astar;
            v[s]        = va - sigma * (astar - slot_const[s]);
            v[offB + s] = vb - sigma * bstar;
        }
        if (!dist) {
            const double le = dx / sigma;
            if (e2) {
                for (int i = 0; i < N; ++i) {
                    const double vp = v[offE + i], vz = v[offE + N + i];
                    double p, z;
                    pair_energy_prox(*su.espec, vp / sigma, vz / sigma, le,
                                     su.phi_c[i], su.theta, su.Scap, p, z);
                    v[offE + i]     = vp - sigma * p;
                    v[offE + N + i] = vz - sigma * z;
                }
            } else {
                for (int i = 0; i < N; ++i) {
                    const double vz = v[offE + i];
                    const double z  = scalar_energy_prox(*su.espec, vz / sigma, le,
                                                         su.phi_c[i], su.Scap);
                    v[offE + i] = vz - sigma * z;
                }
            }
        }
        y.swap(v);

        applyLT(y, grad);
        xnew = x - taubar * grad;
        project(xnew);
        xbar = 2.0 * xnew - x;
        x.swap(xnew);

        // Residual balancing: keep sigma*taubar fixed, trade the step sizes
        // so the primal and dual update magnitudes stay comparable.
        if (adapt_now) {
            applyL(x_pre - x, Lx); // reuse Lx as scratch
            applyLT(y_pre - y, grad);
            const double pres = ((x_pre - x) / taubar - grad).norm();
            const double dres = ((y_pre - y) / sigma - Lx).norm();
            if (pres > 1e-16 && dres > 1e-16) {
                const double r = std::clamp(std::sqrt(pres / dres), 0.8, 1.25);
                taubar *= r;
                sigma /= r;
            }
        }

        const double F = objective_of(x);
        hist.push_back(F);
        if (it >= 120) {
            const double Fw = hist[hist.size() - 1 - window];
            if (std::isfinite(F) && std::isfinite(Fw)) {
                rel = std::abs(F - Fw) / std::max(1.0, std::abs(F));
                if (rel <= tol && (dist || F <= descent_gate)) {
                    converged = true;
                    ++it;
                    break;
                }
            }
        }
    }

    // Final tightening of the constraint (one extra projection pass is
    // enough; the residual is then at the level of the linear solver).
    project(x);

    stats.iterations     = it;
    stats.converged      = converged;
    stats.rel_obj_change = rel;
    {
        Eigen::VectorXd r = W.A * x - b;
        double res = r.cwiseAbs().maxCoeff();
        if (dist) {
            // Dropped (redundant) row, checked explicitly for the report.
            double acc = 0.0;
            const int i = N - 1, k = K - 1;
            const double rk  = x[rvar(K - 1, i)];
            const double rk1 = su.rhoK[i];
            acc = (rk1 - rk) / ds;
            if (i >= 1) acc -= x[wvar(k, i)] / dx;
            res = std::max(res, std::abs(acc));
        }
        stats.continuity_residual = res;
    }

    StepProgramResult out;
    out.stats  = stats;
    out.action = action_of(x);
    if (!dist) {
        // Endpoint extraction with a hard clamp into [0, S] and exact mass
        // restoration (the clamp moves mass at the level of the solver
        // tolerance; the amount is reported, not hidden).
        std::vector<double> u(N);
        for (int i = 0; i < N; ++i) u[i] = x[rvar(K, i)];
        double moved = 0.0;
        for (int round = 0; round < 4; ++round) {
            for (int i = 0; i < N; ++i) {
                const double c = std::clamp(u[i], 0.0, su.Scap);
                moved += std::abs(c - u[i]);
                u[i] = c;
            }
            double ms = 0.0;
            for (double uu : u) ms += uu;
            ms *= dx;
            if (std::abs(ms - 1.0) < 1e-15) break;
            moved += std::abs(ms - 1.0);
            for (double& uu : u) uu /= ms;
        }
        out.stats.clamp_correction = moved;
        out.endpoint = u;
        for (int i = 0; i < N; ++i) scratch.values[i] = u[i];
        out.objective = out.action / (2.0 * su.tau) + eval_energy(*su.espec, scratch);
    } else {
        out.objective = out.action;
    }

    if (keep_path) {
        TransportPath& P = out.path;
        P.K  = K;
        P.ds = ds;
        P.rho.assign(K + 1, std::vector<double>(N, 0.0));
        P.w.assign(K, std::vector<double>(N + 1, 0.0));
        P.rho[0] = su.rho0;
        for (int k = 1; k <= n_rho_layers; ++k)
            for (int i = 0; i < N; ++i) P.rho[k][i] = x[rvar(k, i)];
        if (dist) P.rho[K] = su.rhoK;
        for (int k = 0; k < K; ++k)
            for (int j = 1; j < N; ++j) P.w[k][j] = x[wvar(k, j)];
    }

    if (ws) {
        W.have_prev = true;
        W.x = x;
        W.y = y;
        W.alpha = alpha;
        W.rho0_prev = su.rho0;
        W.sigma  = sigma;
        W.taubar = taubar;
    }
    return out;
}

std::vector<double> unit_mass_copy(const DensityField& u, const char* what) {
    double ms = mass(u);
    if (!(std::abs(ms - 1.0) <= 1e-6))
        throw std::invalid_argument(std::string("transport: ") + what +
                                    " must carry unit mass");
    std::vector<double> v = u.values;
    for (double& x : v) x /= ms;
    return v;
}

} // namespace

double action_value(const MobilitySpec& mspec, double t, double rho, double w) {
    if (w == 0.0) return 0.0;
    const double mm = mspec.m(t, rho);
    if (mm <= 0.0) return kInf;
    return w * w / mm;
}

MetricResult bb_distance_squared(const MobilitySpec& mspec, double t,
                                 const DensityField& u0, const DensityField& u1,
                                 int K, double tol, int max_iterations) {
    if (!u0.grid.same_as(u1.grid))
        throw std::invalid_argument("transport: endpoint fields live on different grids");
    if (K < 2) throw std::invalid_argument("transport: need at least two inner layers");
    if (!(tol > 0.0)) throw std::invalid_argument("transport: tolerance must be positive");

    MetricResult res;
    const double S = mspec.S(t);
    auto exceeds = [&](const DensityField& u) {
        if (!std::isfinite(S)) return false;
        for (double v : u.values)
            if (v > S + 1e-8) return true;
        return false;
    };
    if (exceeds(u0) || exceeds(u1)) {
        res.value      = kInf;
        res.infeasible = true;
        return res;
    }

    CpSetup su;
    su.N    = u0.grid.N;
    su.K    = K;
    su.dx   = u0.grid.dx;
    su.ds   = 1.0 / K;
    su.dist = true;
    su.mob  = Mob{&mspec, t};
    su.Scap = S;
    su.rho0 = unit_mass_copy(u0, "the first endpoint");
    su.rhoK = unit_mass_copy(u1, "the second endpoint");
    su.grid = u0.grid;

    StepProgramResult r = run_cp(su, tol, max_iterations, nullptr, true);
    res.value = r.action;
    res.path  = std::move(r.path);
    res.stats = r.stats;
    return res;
}

StepProgramResult solve_step_program(const MobilitySpec& mspec, double t,
                                     const EnergySpec& espec,
                                     const DensityField& u_prev, double tau,
                                     int K, double tol, int max_iterations,
                                     TransportWorkspace* ws, bool keep_path) {
    if (K < 2) throw std::invalid_argument("transport: need at least two inner layers");
    if (!(tau > 0.0)) throw std::invalid_argument("transport: step length must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("transport: tolerance must be positive");

    CpSetup su;
    su.N    = u_prev.grid.N;
    su.K    = K;
    su.dx   = u_prev.grid.dx;
    su.ds   = 1.0 / K;
    su.dist = false;
    su.mob  = Mob{&mspec, t};
    su.Scap = mspec.S(t);
    su.tau  = tau;
    su.espec = &espec;
    su.rho0  = unit_mass_copy(u_prev, "the start state");
    su.grid  = u_prev.grid;
    if (std::isfinite(su.Scap)) {
        for (double v : su.rho0)
            if (v > su.Scap + 1e-8)
                throw std::invalid_argument(
                    "transport: the start state must lie below the value-space bound "
                    "S at the step's end time");
    }
    su.phi_c.resize(su.N);
    for (int i = 0; i < su.N; ++i) su.phi_c[i] = espec.phi(u_prev.grid.cell_center(i));
    su.E_prev = eval_energy(espec, u_prev);
    su.theta  = (espec.variant == EnergyVariant::E2) ? u_prev.grid.dx : 1.0;

    return run_cp(su, tol, max_iterations, ws, keep_path);
}

// ---------------------------------------------------------------------------
// Exact 1-D quadratic Wasserstein distance through quantile functions
// ---------------------------------------------------------------------------

double w2_squared_1d(const DensityField& u0, const DensityField& u1) {
    if (!u0.grid.same_as(u1.grid))
        throw std::invalid_argument("transport: endpoint fields live on different grids");
    const Grid1D& g = u0.grid;
    const int     N = g.N;

    const double m0 = mass(u0), m1 = mass(u1);
    if (!(m0 > 0.0) || !(m1 > 0.0))
        throw std::invalid_argument("transport: endpoint fields must have positive mass");

    // Normalized CDFs at faces; piecewise linear, flat across empty cells.
    std::vector<double> F0(N + 1, 0.0), F1(N + 1, 0.0);
    for (int i = 0; i < N; ++i) {
        F0[i + 1] = F0[i] + u0.values[i] * g.dx / m0;
        F1[i + 1] = F1[i] + u1.values[i] * g.dx / m1;
    }
    F0[N] = 1.0;
    F1[N] = 1.0;

    // Merged quantile breakpoints; between consecutive breakpoints both
    // quantile functions are affine, so the integral of the squared
    // difference has the exact three-point form.
    std::vector<double> th;
    th.reserve(2 * N + 2);
    th.insert(th.end(), F0.begin(), F0.end());
    th.insert(th.end(), F1.begin(), F1.end());
    std::sort(th.begin(), th.end());

    auto quantile = [&](const std::vector<double>& F, const DensityField& u, double mm,
                        double tmid, double tq) {
        // Cell containing the (positive-width) quantile interval around tmid.
        int c = static_cast<int>(std::upper_bound(F.begin(), F.end(), tmid) - F.begin()) - 1;
        c     = std::clamp(c, 0, N - 1);
        const double dens = u.values[c] / mm; // normalized density, > 0 here
        return g.face(c) + (tq - F[c]) / dens;
    };

    double acc = 0.0;
    for (size_t s = 0; s + 1 < th.size(); ++s) {
        const double ta = th[s], tb = th[s + 1];
        if (!(tb - ta > 1e-16)) continue;
        const double tm = 0.5 * (ta + tb);
        const double da = quantile(F0, u0, m0, tm, ta) - quantile(F1, u1, m1, tm, ta);
        const double db = quantile(F0, u0, m0, tm, tb) - quantile(F1, u1, m1, tm, tb);
        acc += (tb - ta) * (da * da + da * db + db * db) / 3.0;
    }
    return acc;
}

} // namespace mmflow
