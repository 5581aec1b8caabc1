#include "mmflow/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmflow {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Quadrature helpers
// ---------------------------------------------------------------------------

// 16-point Gauss-Legendre rule on [-1, 1] (positive abscissae; the rule is
// symmetric).
constexpr double kGlX[8] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr double kGlW[8] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

template <typename F>
double gauss16(const F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 8; ++i)
        s += kGlW[i] * (f(c - h * kGlX[i]) + f(c + h * kGlX[i]));
    return s * h;
}

// Integrates f over [a, b] on panels geometrically refined toward both
// endpoints (the integrand of the entropy integral is bounded but loses
// smoothness where the mobility degenerates).
template <typename F>
double integrate_geometric(const F& f, double a, double b) {
    if (!(b > a)) return 0.0;
    const double w = 0.5 * (b - a);
    std::vector<double> pts;
    pts.push_back(a);
    for (int k = 52; k >= 1; --k) pts.push_back(a + w * std::ldexp(1.0, -k));
    pts.push_back(a + w);
    for (int k = 1; k <= 52; ++k) pts.push_back(b - w * std::ldexp(1.0, -k));
    pts.push_back(b);
    double s = 0.0;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        if (pts[i + 1] > pts[i]) s += gauss16(f, pts[i], pts[i + 1]);
    return s;
}

// Root of f on [lo, hi] by bisection; f(lo) and f(hi) must have opposite
// signs (or one of them be zero).
template <typename F>
double bisect_root(const F& f, double lo, double hi, double tol_abs) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    if (f(hi) == 0.0) return hi;
    for (int it = 0; it < 200 && (hi - lo) > tol_abs; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm  = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo  = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double clamp01_exp(double a) { return std::min(1.0, std::max(1e-6, a)); }

double reference_point(double S) { return std::min(1.0, 0.5 * S); }

} // namespace

// ---------------------------------------------------------------------------
// Builtin mobilities
// ---------------------------------------------------------------------------

MobilitySpec make_mobility_logistic(double S0, double growth) {
    if (!(S0 > 0.0)) throw std::invalid_argument("logistic mobility: S0 must be positive");
    if (growth < 0.0)
        throw std::invalid_argument("logistic mobility: the value-space bound must be nondecreasing");
    MobilitySpec sp;
    sp.kind     = "logistic";
    sp.s_finite = true;
    sp.s_affine = TimeAffine{S0, growth};
    const TimeAffine S = sp.s_affine;
    sp.m = [S](double t, double z) {
        const double s = S(t);
        if (z <= 0.0 || z >= s) return 0.0;
        return z * (s - z);
    };
    sp.dm = [S](double t, double z) {
        const double s = S(t);
        if (z < 0.0 || z > s) return 0.0;
        return s - 2.0 * z;
    };
    sp.d2m = [S](double t, double z) {
        const double s = S(t);
        if (z < 0.0 || z > s) return 0.0;
        return -2.0;
    };
    sp.has_closed_h = true;
    // h'' = 1/(z(S-z)) = (1/S)(1/z + 1/(S-z)); normalized at z_ref.
    sp.h_closed = [S](double t, double z) {
        const double s    = S(t);
        const double zr   = reference_point(s);
        auto         base = [s](double y) {
            const double a = (y > 0.0) ? y * std::log(y) : 0.0;
            const double b = (s - y > 0.0) ? (s - y) * std::log(s - y) : 0.0;
            return (a + b) / s;
        };
        const double slope = std::log(zr / (s - zr)) / s; // base'(z_ref)
        return base(z) - base(zr) - slope * (z - zr);
    };
    return sp;
}

MobilitySpec make_mobility_power_eps(double eps, TimeAffine alpha) {
    if (!(eps > 0.0)) throw std::invalid_argument("power_eps mobility: eps must be positive");
    if (!(alpha.a > 0.0) || alpha.a > 1.0)
        throw std::invalid_argument("power_eps mobility: exponent must start in (0, 1]");
    MobilitySpec sp;
    sp.kind     = "power_eps";
    sp.s_finite = false;
    auto a_of_t = [alpha](double t) { return clamp01_exp(alpha(t)); };
    sp.m = [eps, a_of_t](double t, double z) {
        if (z <= 0.0) return 0.0;
        const double a = a_of_t(t);
        return std::pow(z + eps, a) - std::pow(eps, a);
    };
    sp.dm = [eps, a_of_t](double t, double z) {
        if (z < 0.0) return 0.0;
        const double a = a_of_t(t);
        return a * std::pow(z + eps, a - 1.0);
    };
    sp.d2m = [eps, a_of_t](double t, double z) {
        if (z < 0.0) return 0.0;
        const double a = a_of_t(t);
        return a * (a - 1.0) * std::pow(z + eps, a - 2.0);
    };
    return sp;
}

MobilitySpec make_mobility_power(TimeAffine alpha) {
    if (!(alpha.a > 0.0) || alpha.a > 1.0)
        throw std::invalid_argument("power mobility: exponent must start in (0, 1]");
    MobilitySpec sp;
    sp.kind     = "power";
    sp.s_finite = false;
    auto a_of_t = [alpha](double t) { return clamp01_exp(alpha(t)); };
    sp.m = [a_of_t](double t, double z) {
        if (z <= 0.0) return 0.0;
        return std::pow(z, a_of_t(t));
    };
    sp.dm = [a_of_t](double t, double z) {
        if (z < 0.0) return 0.0;
        const double a = a_of_t(t);
        if (z == 0.0) return (a < 1.0) ? kInf : 1.0;
        return a * std::pow(z, a - 1.0);
    };
    sp.d2m = [a_of_t](double t, double z) {
        if (z < 0.0) return 0.0;
        const double a = a_of_t(t);
        if (z == 0.0) return (a < 1.0) ? -kInf : 0.0;
        return a * (a - 1.0) * std::pow(z, a - 2.0);
    };
    sp.has_closed_h = true;
    // h'' = z^{-a}: double antiderivative z^{2-a}/((1-a)(2-a)); the a = 1
    // limit is the Boltzmann form z ln z - z.
    sp.h_closed = [a_of_t](double t, double z) {
        const double a  = a_of_t(t);
        const double zr = 1.0; // reference point for an unbounded value space
        if (std::abs(a - 1.0) < 1e-12) {
            const double zl = (z > 0.0) ? z * std::log(z) : 0.0;
            return zl - z + 1.0;
        }
        auto base  = [a](double y) { return std::pow(y, 2.0 - a) / ((1.0 - a) * (2.0 - a)); };
        auto dbase = [a](double y) { return std::pow(y, 1.0 - a) / (1.0 - a); };
        return base(z) - base(zr) - dbase(zr) * (z - zr);
    };
    return sp;
}

MobilitySpec make_mobility_linear(double C) {
    if (!(C > 0.0)) throw std::invalid_argument("linear mobility: slope must be positive");
    MobilitySpec sp;
    sp.kind     = "linear";
    sp.s_finite = false;
    sp.m   = [C](double, double z) { return (z > 0.0) ? C * z : 0.0; };
    sp.dm  = [C](double, double z) { return (z >= 0.0) ? C : 0.0; };
    sp.d2m = [](double, double) { return 0.0; };
    sp.has_closed_h = true;
    sp.h_closed     = [C](double, double z) {
        const double zl = (z > 0.0) ? z * std::log(z) : 0.0;
        return (zl - z + 1.0) / C; // normalized at z_ref = 1
    };
    return sp;
}

MobilitySpec make_mobility_custom(std::function<double(double, double)> m,
                                  std::function<double(double, double)> dm,
                                  std::function<double(double, double)> d2m,
                                  bool s_finite, TimeAffine s_affine) {
    if (!m) throw std::invalid_argument("custom mobility: missing evaluator");
    if (s_finite && !(s_affine.a > 0.0))
        throw std::invalid_argument("custom mobility: nonpositive value-space bound");
    if (s_finite && s_affine.b < 0.0)
        throw std::invalid_argument("custom mobility: the value-space bound must be nondecreasing");
    MobilitySpec sp;
    sp.kind     = "custom";
    sp.s_finite = s_finite;
    sp.s_affine = s_affine;
    sp.m        = m;
    // Central differences with a documented step for missing derivatives.
    if (dm) {
        sp.dm = dm;
    } else {
        sp.dm = [m](double t, double z) {
            const double hstep = 1e-5 * std::max(1.0, std::abs(z));
            return (m(t, z + hstep) - m(t, z - hstep)) / (2.0 * hstep);
        };
    }
    if (d2m) {
        sp.d2m = d2m;
    } else {
        auto base = m;
        sp.d2m    = [base](double t, double z) {
            const double hstep = 1e-5 * std::max(1.0, std::abs(z));
            return (base(t, z + hstep) - 2.0 * base(t, z) + base(t, z - hstep)) /
                   (hstep * hstep);
        };
    }
    return sp;
}

// ---------------------------------------------------------------------------
// Heat entropy
// ---------------------------------------------------------------------------

double heat_entropy_density_quadrature(const MobilitySpec& spec, double t, double z) {
    const double S = spec.S(t);
    if (!(z >= -1e-12) || (std::isfinite(S) && z > S + 1e-12))
        throw std::invalid_argument("heat entropy: state outside the value space");
    z = std::max(0.0, std::isfinite(S) ? std::min(z, S) : z);
    const double zr = reference_point(S);
    if (z == zr) return 0.0;
    // h(z) = int_{z_ref}^{z} (z - s) / m(t, s) ds; for z < z_ref the
    // integrand is evaluated on [z, z_ref] and the orientation flips sign.
    auto integrand = [&](double s) { return (z - s) / spec.m(t, s); };
    if (z > zr) return integrate_geometric(integrand, zr, z);
    return -integrate_geometric(integrand, z, zr);
}

double heat_entropy_density(const MobilitySpec& spec, double t, double z) {
    if (spec.has_closed_h) {
        const double S = spec.S(t);
        if (!(z >= -1e-12) || (std::isfinite(S) && z > S + 1e-12))
            throw std::invalid_argument("heat entropy: state outside the value space");
        z = std::max(0.0, std::isfinite(S) ? std::min(z, S) : z);
        return spec.h_closed(t, z);
    }
    return heat_entropy_density_quadrature(spec, t, z);
}

double mobility_max_on(const MobilitySpec& spec, double t, double lo, double hi) {
    const double S = spec.S(t);
    lo             = std::max(lo, 0.0);
    if (std::isfinite(S)) hi = std::min(hi, S);
    if (!(hi > lo)) return std::max(0.0, spec.m(t, std::max(lo, 0.0)));
    // Coarse scan plus, for concave m, a bisection on dm to pin the interior
    // maximum exactly.
    double best = std::max(spec.m(t, lo), spec.m(t, hi));
    for (int i = 1; i < 256; ++i) {
        const double zi = lo + (hi - lo) * i / 256.0;
        best            = std::max(best, spec.m(t, zi));
    }
    const double dlo = spec.dm(t, lo + 1e-14 * (hi - lo));
    const double dhi = spec.dm(t, hi - 1e-14 * (hi - lo));
    if (dlo > 0.0 && dhi < 0.0) {
        const double zstar =
            bisect_root([&](double zz) { return spec.dm(t, zz); }, lo, hi, 1e-14 * (hi - lo));
        best = std::max(best, spec.m(t, zstar));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Delta-approximation
// ---------------------------------------------------------------------------

namespace {

// Location of the interior maximum of the concave m(t, .) on [0, S].
double argmax_concave(const MobilitySpec& spec, double t, double S) {
    const double a = 1e-13 * S, b = S * (1.0 - 1e-13);
    if (spec.dm(t, a) <= 0.0) return a;
    if (spec.dm(t, b) >= 0.0) return b;
    return bisect_root([&](double z) { return spec.dm(t, z); }, a, b, 1e-15 * S);
}

} // namespace

MobilitySpec approximate_mobility(const MobilitySpec& spec, double delta, double t_check) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta-approximation: delta must be positive");
    MobilitySpec out;
    out.kind = spec.kind + "-delta";
    if (spec.s_finite) {
        if (spec.s_affine.b != 0.0)
            throw std::invalid_argument(
                "delta-approximation: requires a constant value-space bound");
        const double S = spec.s_affine.a;
        out.s_finite   = true;
        out.s_affine   = spec.s_affine;
        // Validate delta < sup m eagerly at t_check.
        const double zstar = argmax_concave(spec, t_check, S);
        if (!(delta < spec.m(t_check, zstar)))
            throw std::invalid_argument("delta-approximation: delta is not below the maximum of m");
        // Per-time roots z1 < z2 of m(t, .) = delta; the squeezed mobility
        // maps [0, S] affinely onto [z1, z2] and subtracts delta, so the
        // support endpoints land exactly on zero.
        auto roots = [spec, delta, S](double t, double& z1, double& z2) {
            const double zs = argmax_concave(spec, t, S);
            if (!(delta < spec.m(t, zs)))
                throw std::invalid_argument(
                    "delta-approximation: delta is not below the maximum of m");
            z1 = bisect_root([&](double z) { return spec.m(t, z) - delta; }, 0.0, zs, 1e-13);
            z2 = bisect_root([&](double z) { return spec.m(t, z) - delta; }, zs, S, 1e-13);
        };
        out.m = [spec, roots, delta, S](double t, double z) {
            if (z <= 0.0 || z >= S) return 0.0;
            double z1, z2;
            roots(t, z1, z2);
            return std::max(0.0, spec.m(t, z1 + (z2 - z1) * z / S) - delta);
        };
        out.dm = [spec, roots, S](double t, double z) {
            if (z < 0.0 || z > S) return 0.0;
            double z1, z2;
            roots(t, z1, z2);
            return spec.dm(t, z1 + (z2 - z1) * z / S) * (z2 - z1) / S;
        };
        out.d2m = [spec, roots, S](double t, double z) {
            if (z < 0.0 || z > S) return 0.0;
            double z1, z2;
            roots(t, z1, z2);
            const double r = (z2 - z1) / S;
            return spec.d2m(t, z1 + (z2 - z1) * z / S) * r * r;
        };
    } else {
        out.s_finite = false;
        // Unique root of the nondecreasing m(t, .) = delta, then shift.
        auto shift = [spec, delta](double t) {
            double hi = 1.0;
            while (spec.m(t, hi) < delta) {
                hi *= 2.0;
                if (hi > 1e12)
                    throw std::invalid_argument(
                        "delta-approximation: delta is not below the supremum of m");
            }
            return bisect_root([&](double z) { return spec.m(t, z) - delta; }, 0.0, hi, 1e-13);
        };
        (void)shift(t_check); // eager precondition check
        out.m = [spec, shift, delta](double t, double z) {
            if (z <= 0.0) return 0.0;
            return std::max(0.0, spec.m(t, z + shift(t)) - delta);
        };
        out.dm = [spec, shift](double t, double z) {
            if (z < 0.0) return 0.0;
            return spec.dm(t, z + shift(t));
        };
        out.d2m = [spec, shift](double t, double z) {
            if (z < 0.0) return 0.0;
            return spec.d2m(t, z + shift(t));
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Admissibility checking
// ---------------------------------------------------------------------------

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

bool AdmissibilityReport::core_conditions_pass() const {
    for (const ConditionReport* c : {&support, &positivity, &concavity, &lipschitz_t,
                                     &slope_bound, &semiconcavity, &entropy_exists})
        if (c->verdict != Verdict::pass) return false;
    return true;
}

namespace {

void set_fail(ConditionReport& c, const std::string& note, double t, double z) {
    if (c.verdict == Verdict::fail) return; // keep the first witness
    c.verdict     = Verdict::fail;
    c.note        = note;
    c.has_witness = true;
    c.witness_t   = t;
    c.witness_z   = z;
}

// Divergence heuristic on a sequence sampled along geometrically shrinking
// rungs (index grows toward the degenerate endpoint): sustained growth of
// the magnitudes marks an unbounded supremum.
bool diverges(const std::vector<double>& vals) {
    const int n = static_cast<int>(vals.size());
    if (n < 8) return false;
    for (double v : vals)
        if (std::isinf(v) || std::isnan(v)) return true;
    int    rising = 0;
    double total  = 1.0;
    for (int k = n - 6; k < n; ++k) {
        const double prev = std::abs(vals[k - 1]), cur = std::abs(vals[k]);
        if (prev > 0.0 && cur > 1.05 * prev) ++rising;
        if (prev > 0.0) total *= cur / prev;
    }
    return rising >= 5 && total > 1.5;
}

} // namespace

AdmissibilityReport check_admissibility(const MobilitySpec& spec,
                                        const std::vector<double>& t_samples,
                                        int z_resolution) {
    if (t_samples.empty())
        throw std::invalid_argument("admissibility: need at least one time sample");
    for (size_t i = 1; i < t_samples.size(); ++i)
        if (!(t_samples[i] > t_samples[i - 1]))
            throw std::invalid_argument("admissibility: time samples must be ascending");
    if (z_resolution < 64)
        throw std::invalid_argument("admissibility: need z resolution >= 64");

    AdmissibilityReport rep;
    rep.t_samples = t_samples;
    for (ConditionReport* c : {&rep.support, &rep.positivity, &rep.concavity, &rep.lipschitz_t,
                               &rep.slope_bound, &rep.semiconcavity, &rep.entropy_exists,
                               &rep.boundary_decay})
        c->verdict = Verdict::pass;

    const bool   custom  = spec.kind.rfind("custom", 0) == 0;
    const int    n_rungs = 44; // geometric rungs, down to ~6e-14 of the span
    double       C_est   = 0.0;
    bool         C_fin   = true;
    double       lip_max = 0.0;

    for (double t : t_samples) {
        const double S     = spec.S(t);
        const double S_eff = std::isfinite(S) ? S : 16.0;

        // Sample lattice: geometric rungs toward 0 (and toward S when
        // finite) plus a uniform interior sweep.
        std::vector<double> zs;
        for (int k = 1; k <= n_rungs; ++k) zs.push_back(S_eff * std::ldexp(1.0, -k));
        if (std::isfinite(S))
            for (int k = 1; k <= n_rungs; ++k)
                zs.push_back(S * (1.0 - std::ldexp(1.0, -k)));
        for (int j = 0; j < z_resolution; ++j)
            zs.push_back(S_eff * (j + 0.5) / z_resolution);
        std::sort(zs.begin(), zs.end());

        // Support endpoints.
        if (std::abs(spec.m(t, 0.0)) > 1e-12)
            set_fail(rep.support, "m(t, 0) is not zero", t, 0.0);
        if (std::isfinite(S) && std::abs(spec.m(t, S)) > 1e-12 * std::max(1.0, S * S))
            set_fail(rep.support, "m(t, S(t)) is not zero", t, S);

        // Interior positivity and concavity, global suprema for the slope
        // and semiconcavity bounds.
        double m1 = 0.0, m2 = 0.0, d2scale = 0.0;
        for (double z : zs) {
            const double mv = spec.m(t, z);
            if (!(mv > 0.0))
                set_fail(rep.positivity, "m(t, z) is not positive in the interior", t, z);
            const double d2 = spec.d2m(t, z);
            d2scale         = std::max(d2scale, std::abs(d2));
            const double dm = spec.dm(t, z);
            if (std::isfinite(dm)) m1 = std::max(m1, std::abs(dm));
            if (std::isfinite(d2) && std::isfinite(mv)) m2 = std::max(m2, -mv * d2);
        }
        for (double z : zs) {
            const double d2 = spec.d2m(t, z);
            if (d2 > 1e-8 * (1.0 + d2scale)) {
                // Finite-difference derivative noise near the endpoints is
                // inconclusive rather than a refutation for custom specs.
                if (custom && (z < 1e-6 * S_eff || (std::isfinite(S) && S - z < 1e-6 * S_eff))) {
                    if (rep.concavity.verdict == Verdict::pass)
                        rep.concavity.verdict = Verdict::inconclusive;
                } else {
                    set_fail(rep.concavity, "second derivative in z is positive", t, z);
                }
            }
        }
        rep.slope_sup_of_t.push_back(m1);
        rep.semiconc_sup_of_t.push_back(m2);

        // Divergence scan along the rungs toward the degenerate endpoints.
        std::vector<double> dm_rungs, md2_rungs, decay0_rungs;
        for (int k = 1; k <= n_rungs; ++k) {
            const double z  = S_eff * std::ldexp(1.0, -k);
            const double dm = spec.dm(t, z);
            dm_rungs.push_back(dm);
            md2_rungs.push_back(-spec.m(t, z) * spec.d2m(t, z));
            decay0_rungs.push_back(dm * std::sqrt(z));
        }
        if (diverges(dm_rungs))
            set_fail(rep.slope_bound, "sup_z |dm(t, z)| diverges toward z = 0", t,
                     S_eff * std::ldexp(1.0, -n_rungs));
        if (diverges(md2_rungs))
            set_fail(rep.semiconcavity, "sup_z (-m d2m)(t, z) diverges toward z = 0", t,
                     S_eff * std::ldexp(1.0, -n_rungs));
        if (std::isfinite(S)) {
            std::vector<double> dm_rungs_s, md2_rungs_s;
            for (int k = 1; k <= n_rungs; ++k) {
                const double z = S * (1.0 - std::ldexp(1.0, -k));
                dm_rungs_s.push_back(spec.dm(t, z));
                md2_rungs_s.push_back(-spec.m(t, z) * spec.d2m(t, z));
            }
            if (diverges(dm_rungs_s))
                set_fail(rep.slope_bound, "sup_z |dm(t, z)| diverges toward z = S(t)", t,
                         S * (1.0 - std::ldexp(1.0, -n_rungs)));
            if (diverges(md2_rungs_s))
                set_fail(rep.semiconcavity, "sup_z (-m d2m)(t, z) diverges toward z = S(t)", t,
                         S * (1.0 - std::ldexp(1.0, -n_rungs)));
        }

        // Boundary decay of dm sqrt(z) (and dm sqrt(S - z) for finite S):
        // the tail must tend to zero; a stabilized nonzero tail refutes.
        {
            double scale = 0.0;
            for (double v : decay0_rungs)
                if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
            const double tail     = std::abs(decay0_rungs.back());
            const double tail_pre = std::abs(decay0_rungs[decay0_rungs.size() - 5]);
            if (diverges(decay0_rungs)) {
                set_fail(rep.boundary_decay, "dm(t, z) sqrt(z) diverges toward z = 0", t,
                         S_eff * std::ldexp(1.0, -n_rungs));
            } else if (scale > 0.0 && tail > 1e-6 &&
                       std::abs(tail - tail_pre) <= 0.01 * tail) {
                set_fail(rep.boundary_decay,
                         "dm(t, z) sqrt(z) stabilizes at a nonzero value toward z = 0", t,
                         S_eff * std::ldexp(1.0, -n_rungs));
            } else if (scale > 0.0 && tail > 1e-3 * scale) {
                if (rep.boundary_decay.verdict == Verdict::pass)
                    rep.boundary_decay.verdict = Verdict::inconclusive;
            }
            if (std::isfinite(S)) {
                std::vector<double> decayS;
                for (int k = 1; k <= n_rungs; ++k) {
                    const double z = S * (1.0 - std::ldexp(1.0, -k));
                    decayS.push_back(spec.dm(t, z) * std::sqrt(S - z));
                }
                double scaleS = 0.0;
                for (double v : decayS)
                    if (std::isfinite(v)) scaleS = std::max(scaleS, std::abs(v));
                const double tS  = std::abs(decayS.back());
                const double tSp = std::abs(decayS[decayS.size() - 5]);
                if (diverges(decayS)) {
                    set_fail(rep.boundary_decay, "dm(t, z) sqrt(S - z) diverges toward z = S", t,
                             S * (1.0 - std::ldexp(1.0, -n_rungs)));
                } else if (scaleS > 0.0 && tS > 1e-6 && std::abs(tS - tSp) <= 0.01 * tS) {
                    set_fail(rep.boundary_decay,
                             "dm(t, z) sqrt(S - z) stabilizes at a nonzero value toward z = S",
                             t, S * (1.0 - std::ldexp(1.0, -n_rungs)));
                }
            }
        }

        // Estimate of C = lim_{z->0+} dm(t, z): for concave m the slope is
        // largest at the smallest sampled rung.
        const double dm_small = spec.dm(t, S_eff * std::ldexp(1.0, -n_rungs));
        if (!std::isfinite(dm_small) || diverges(dm_rungs)) C_fin = false;
        else C_est = std::max(C_est, dm_small);

        // Entropy consistency m h'' = 1 at interior samples, second central
        // difference of h with a step balancing truncation and quadrature
        // noise.
        {
            const double span = std::isfinite(S) ? S : 1.0;
            double       dev  = 0.0;
            bool         ok   = true;
            for (int j = 0; j <= 8; ++j) {
                const double z  = span * (0.2 + 0.6 * j / 8.0);
                const double dz = 1e-3 * span;
                try {
                    const double hm = heat_entropy_density(spec, t, z - dz);
                    const double h0 = heat_entropy_density(spec, t, z);
                    const double hp = heat_entropy_density(spec, t, z + dz);
                    const double d2h = (hp - 2.0 * h0 + hm) / (dz * dz);
                    dev = std::max(dev, std::abs(spec.m(t, z) * d2h - 1.0));
                } catch (const std::exception&) {
                    ok = false;
                }
            }
            if (!ok) {
                if (rep.entropy_exists.verdict == Verdict::pass)
                    rep.entropy_exists.verdict = Verdict::inconclusive;
                rep.entropy_exists.note = "entropy quadrature failed at some samples";
            } else if (dev > 1e-4) {
                set_fail(rep.entropy_exists, "m d2h deviates from 1 beyond tolerance", t, 0.5 * span);
            }
        }
    }

    // Lipschitz-in-t difference quotients (refutable only; a single time
    // sample leaves nothing to check).
    if (t_samples.size() >= 2) {
        for (size_t i = 0; i + 1 < t_samples.size(); ++i) {
            const double t0 = t_samples[i], t1 = t_samples[i + 1];
            const double S1    = spec.S(t1);
            const double S_eff = std::isfinite(S1) ? S1 : 16.0;
            for (int j = 0; j < 128; ++j) {
                const double z = S_eff * (j + 0.5) / 128.0;
                const double q = std::abs(spec.m(t1, z) - spec.m(t0, z)) / (t1 - t0);
                if (!std::isfinite(q)) {
                    set_fail(rep.lipschitz_t, "time difference quotient is not finite", t1, z);
                } else {
                    lip_max = std::max(lip_max, q);
                }
            }
        }
        rep.lipschitz_t.note = "max sampled |m(t1,z)-m(t0,z)|/(t1-t0) = " + std::to_string(lip_max);
    } else {
        rep.lipschitz_t.note = "single time sample: nothing to refute";
    }

    rep.C_estimate = C_fin ? C_est : kInf;
    rep.C_finite   = C_fin;

    // Report-only growth exponent of h near 0 (fitted on the last rung
    // decade against the limit value at the smallest rung).
    {
        const double t0   = t_samples.front();
        const double S    = spec.S(t0);
        const double span = std::isfinite(S) ? S : 1.0;
        try {
            const double h_a = heat_entropy_density(spec, t0, span * std::ldexp(1.0, -20));
            const double h_b = heat_entropy_density(spec, t0, span * std::ldexp(1.0, -21));
            const double h_0 = heat_entropy_density(spec, t0, span * std::ldexp(1.0, -40));
            const double da = std::abs(h_a - h_0), db = std::abs(h_b - h_0);
            rep.entropy_growth_exponent =
                (da > 0.0 && db > 0.0) ? std::log2(da / db) : 0.0;
        } catch (const std::exception&) {
            rep.entropy_growth_exponent = std::numeric_limits<double>::quiet_NaN();
        }
    }

    return rep;
}

} // namespace mmflow
