// Time-dependent nonlinear mobilities m(t, z): concave in z, vanishing at
// z = 0 and (for a finite value space) at z = S(t), with S nondecreasing.
// This header provides the builtin families, the induced heat-entropy
// density h(t, z) with m * h'' = 1, a delta-shift approximation that turns a
// non-Lipschitz mobility into an admissible one, and a sampling-based
// admissibility checker for the structural conditions the solver relies on.

#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace mmflow {

// Affine-in-time scalar descriptor: value(t) = a + b*t.  Restricting the
// time dependence of S(t) and of power-law exponents to this form keeps
// local Lipschitz continuity in t automatic and exactly checkable.
struct TimeAffine {
    double a = 0.0;
    double b = 0.0;
    double operator()(double t) const { return a + b * t; }
    bool   constant() const { return b == 0.0; }
};

struct MobilitySpec {
    // One of: logistic | power_eps | power | linear | custom, with
    // "-delta" appended for delta-approximants.
    std::string kind;

    // m(t,z) and its z-derivatives; defined for z in [0, S(t)] (clamped
    // evaluation outside returns the boundary values / zero).
    std::function<double(double, double)> m;
    std::function<double(double, double)> dm;  // d/dz m
    std::function<double(double, double)> d2m; // d2/dz2 m

    bool       s_finite = false;
    TimeAffine s_affine;                        // S(t) when finite (b >= 0)

    // Closed-form heat entropy when available (otherwise h is integrated
    // numerically); normalized so that h(t, z_ref) = dh(t, z_ref) = 0 at
    // z_ref = min(1, S(t)/2).
    bool                                  has_closed_h = false;
    std::function<double(double, double)> h_closed;

    double S(double t) const {
        return s_finite ? s_affine(t) : std::numeric_limits<double>::infinity();
    }
};

// m(t,z) = z (S(t) - z) on [0, S(t)], S(t) = S0 + growth*t, growth >= 0.
MobilitySpec make_mobility_logistic(double S0, double growth);

// m(t,z) = (z + eps)^alpha(t) - eps^alpha(t), S = +inf; eps > 0,
// alpha(t) in (0, 1] (affine descriptor, clamped into (0, 1]).
MobilitySpec make_mobility_power_eps(double eps, TimeAffine alpha);

// m(t,z) = z^alpha(t), S = +inf.  Not Lipschitz at z = 0 for alpha < 1;
// kept as the canonical input for the delta-approximation path.
MobilitySpec make_mobility_power(TimeAffine alpha);

// m(z) = C z, C > 0.  The induced transport distance is W2^2 / C.
MobilitySpec make_mobility_linear(double C);

// Custom mobility from evaluators.  Missing derivative evaluators are
// replaced by central differences with step 1e-5 * max(1, z); admissibility
// verdicts for such specs degrade to inconclusive near the endpoints.
MobilitySpec make_mobility_custom(std::function<double(double, double)> m,
                                  std::function<double(double, double)> dm,
                                  std::function<double(double, double)> d2m,
                                  bool s_finite, TimeAffine s_affine);

// Heat-entropy density h(t,z) solving m(t,.) h''(t,.) = 1, normalized by
// h = h' = 0 at z_ref = min(1, S(t)/2).  Uses the closed form when the
// mobility carries one, otherwise the single-integral form
//   h(t,z) = integral_{z_ref}^{z} (z - s) / m(t,s) ds
// evaluated with geometric panel subdivision toward the degenerate
// endpoints.  Throws if z lies outside [0, S(t)] (the value at z = S(t)
// itself is a finite limit and is admitted).
double heat_entropy_density(const MobilitySpec& spec, double t, double z);

// Always-quadrature variant (ignores the closed form); used to cross-check
// the closed forms in tests.
double heat_entropy_density_quadrature(const MobilitySpec& spec, double t, double z);

// max of m(t,.) over [lo, hi] (exploits concavity: the maximum sits at an
// endpoint or at the unique interior zero of dm).
double mobility_max_on(const MobilitySpec& spec, double t, double lo, double hi);

// Delta-approximation of a (possibly non-Lipschitz) mobility with constant
// value space.  Finite S: remap [0, S] affinely onto [z1(t), z2(t)], the two
// roots of m(t, .) = delta, and subtract delta.  Infinite S: shift by the
// unique root z_d(t) of m(t, .) = delta and subtract delta.  Negative values
// are clamped to zero outside the support.  `t_check` is where the
// precondition delta < sup_z m(t, .) is validated eagerly.
MobilitySpec approximate_mobility(const MobilitySpec& spec, double delta, double t_check);

enum class Verdict { pass, fail, inconclusive };

std::string verdict_name(Verdict v);

struct ConditionReport {
    Verdict     verdict = Verdict::inconclusive;
    std::string note;
    // Witness of a failure (meaningful when verdict == fail).
    bool   has_witness = false;
    double witness_t   = 0.0;
    double witness_z   = 0.0;
};

struct AdmissibilityReport {
    // Structural conditions on m(t, .):
    ConditionReport support;        // m = 0 at z = 0 and (finite S) z = S(t)
    ConditionReport positivity;     // m > 0 on the open interior
    ConditionReport concavity;      // d2m <= 0 on the interior
    ConditionReport lipschitz_t;    // bounded difference quotients in t
    ConditionReport slope_bound;    // sup_z |dm| finite (per t)
    ConditionReport semiconcavity;  // sup_z (-m * d2m) finite (per t)
    ConditionReport entropy_exists; // m * h'' = 1 within tolerance
    ConditionReport boundary_decay; // dm * sqrt(z) -> 0 at z -> 0 (and at S)

    std::vector<double> t_samples;
    std::vector<double> slope_sup_of_t;    // sampled sup_z |dm(t, .)|
    std::vector<double> semiconc_sup_of_t; // sampled sup_z (-m d2m)(t, .)

    // Estimate of C = max_t lim_{z->0+} dm(t,z); for concave m the limit is
    // the supremum of dm, attained at the smallest sampled z.
    double C_estimate = 0.0;
    bool   C_finite   = true;

    // Report-only: fitted growth exponent of |h| near z = 0 (no verdict).
    double entropy_growth_exponent = 0.0;

    bool core_conditions_pass() const; // support+positivity+concavity+lipschitz+slope+semiconcavity+entropy
};

// Samples the conditions on a (t, z) lattice that is geometrically refined
// toward z = 0 and z = S(t); z_resolution >= 64 controls the lattice size.
// Sampling can refute a condition (with a witness) but not certify it; a
// "pass" means no violation was found and divergence indicators stayed flat.
AdmissibilityReport check_admissibility(const MobilitySpec& spec,
                                        const std::vector<double>& t_samples,
                                        int z_resolution);

} // namespace mmflow
