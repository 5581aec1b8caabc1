#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmflow/mobility.hpp"

using namespace mmflow;

namespace {

// Second difference of the entropy density; used to test m * h'' = 1.
double h_second_diff(const MobilitySpec& spec, double t, double z, double step) {
    const double hp = heat_entropy_density(spec, t, z + step);
    const double h0 = heat_entropy_density(spec, t, z);
    const double hm = heat_entropy_density(spec, t, z - step);
    return (hp - 2.0 * h0 + hm) / (step * step);
}

} // namespace

TEST_CASE("logistic mobility: values, derivatives, moving value space") {
    const MobilitySpec m = make_mobility_logistic(1.0, 1.0); // S(t) = 1 + t
    CHECK(m.s_finite);
    CHECK(m.S(0.0) == doctest::Approx(1.0));
    CHECK(m.S(0.5) == doctest::Approx(1.5));

    const double t = 0.25, S = 1.25;
    for (double z : {0.1, 0.5, 0.9, 1.2}) {
        CHECK(m.m(t, z) == doctest::Approx(z * (S - z)).epsilon(1e-14));
        CHECK(m.dm(t, z) == doctest::Approx(S - 2 * z).epsilon(1e-12));
        CHECK(m.d2m(t, z) == doctest::Approx(-2.0).epsilon(1e-12));
    }
    CHECK(m.m(t, 0.0) == 0.0);
    CHECK(m.m(t, S) == doctest::Approx(0.0));
    // Clamped evaluation outside the value space.
    CHECK(m.m(t, -0.5) == 0.0);
    CHECK(m.m(t, S + 0.5) == doctest::Approx(0.0));

    CHECK_THROWS(make_mobility_logistic(0.0, 1.0));
    CHECK_THROWS(make_mobility_logistic(1.0, -0.1));
}

TEST_CASE("closed-form entropies match the quadrature to 1e-8") {
    // Linear mobility m = z: h(z) = z ln z - z + 1 (reference point z = 1).
    const MobilitySpec lin = make_mobility_linear(1.0);
    REQUIRE(lin.has_closed_h);
    for (double z : {1e-4, 0.05, 0.3, 1.0, 2.5, 7.0}) {
        const double closed = z * std::log(z) - z + 1.0;
        CHECK(heat_entropy_density(lin, 0.0, z) == doctest::Approx(closed).epsilon(1e-10));
        CHECK(std::abs(heat_entropy_density_quadrature(lin, 0.0, z) - closed) < 1e-8);
    }
    // h(0) is the finite limit 1.
    CHECK(heat_entropy_density(lin, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-10));

    // Logistic with S = 1: h(z) = z ln z + (1-z) ln(1-z) + ln 2 (ref 1/2).
    const MobilitySpec logi = make_mobility_logistic(1.0, 0.0);
    REQUIRE(logi.has_closed_h);
    for (double z : {0.01, 0.2, 0.5, 0.8, 0.99}) {
        const double closed = z * std::log(z) + (1 - z) * std::log(1 - z) + std::log(2.0);
        CHECK(heat_entropy_density(logi, 0.0, z) == doctest::Approx(closed).epsilon(1e-10));
        CHECK(std::abs(heat_entropy_density_quadrature(logi, 0.0, z) - closed) < 1e-8);
    }
    CHECK(heat_entropy_density(logi, 0.0, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    CHECK_THROWS(heat_entropy_density(logi, 0.0, 1.5)); // outside [0, S]
}

TEST_CASE("entropy density solves m h'' = 1") {
    const double step = 1e-4;
    const MobilitySpec pe = make_mobility_power_eps(0.1, TimeAffine{0.7, 0.0});
    for (double z : {0.1, 0.4, 1.0, 2.0}) {
        const double hpp = h_second_diff(pe, 0.3, z, step);
        CHECK(pe.m(0.3, z) * hpp == doctest::Approx(1.0).epsilon(1e-4));
    }
    const MobilitySpec logi = make_mobility_logistic(2.0, 1.0);
    for (double z : {0.3, 1.0, 1.7}) {
        const double hpp = h_second_diff(logi, 0.5, z, step);
        CHECK(logi.m(0.5, z) * hpp == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("mobility_max_on exploits concavity") {
    const MobilitySpec logi = make_mobility_logistic(2.0, 0.0); // peak at z = 1
    CHECK(mobility_max_on(logi, 0.0, 0.0, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mobility_max_on(logi, 0.0, 0.0, 0.5) == doctest::Approx(0.5 * 1.5).epsilon(1e-12));
    CHECK(mobility_max_on(logi, 0.0, 1.5, 2.0) == doctest::Approx(1.5 * 0.5).epsilon(1e-12));

    const MobilitySpec lin = make_mobility_linear(2.0);
    CHECK(mobility_max_on(lin, 0.0, 0.0, 3.0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("admissibility: smooth builtins pass, square root fails near zero") {
    const std::vector<double> ts{0.0, 0.25, 0.5, 0.75, 1.0};

    const AdmissibilityReport logi =
        check_admissibility(make_mobility_logistic(1.0, 1.0), ts, 128);
    CHECK(logi.core_conditions_pass());
    CHECK(logi.boundary_decay.verdict == Verdict::pass);
    CHECK(logi.C_finite);
    // For z (S - z) the slope at 0 is S(t); the largest sampled t wins.
    CHECK(logi.C_estimate == doctest::Approx(2.0).epsilon(1e-2));

    const AdmissibilityReport pe =
        check_admissibility(make_mobility_power_eps(0.1, TimeAffine{0.5, 0.0}), ts, 128);
    CHECK(pe.core_conditions_pass());
    CHECK(pe.boundary_decay.verdict == Verdict::pass);

    // m = sqrt(z): unbounded slope at z = 0, refuted with a witness.
    const AdmissibilityReport sq =
        check_admissibility(make_mobility_power(TimeAffine{0.5, 0.0}), ts, 128);
    CHECK(!sq.core_conditions_pass());
    CHECK(sq.slope_bound.verdict == Verdict::fail);
    CHECK(sq.slope_bound.has_witness);
    CHECK(sq.slope_bound.witness_z < 1e-2);
    CHECK(!sq.C_finite);
}

TEST_CASE("delta approximants: admissible, below the original, converging") {
    const MobilitySpec sqrt_m = make_mobility_power(TimeAffine{0.5, 0.0});
    const std::vector<double> ts{0.0, 0.5, 1.0};
    const std::vector<double> zs{0.0,  1e-4, 1e-3, 0.01, 0.1, 0.3,
                                 0.7,  1.0,  1.5,  2.0,  3.0};

    double prev_sup = std::numeric_limits<double>::infinity();
    for (double delta : {0.1, 0.05, 0.025}) {
        const MobilitySpec md = approximate_mobility(sqrt_m, delta, 0.0);

        const AdmissibilityReport rep = check_admissibility(md, ts, 128);
        CHECK(rep.core_conditions_pass());

        double sup = 0.0;
        for (double t : ts) {
            for (double z : zs) {
                const double gap = sqrt_m.m(t, z) - md.m(t, z);
                CHECK(gap >= -1e-12); // m_delta <= m pointwise
                sup = std::max(sup, gap);
            }
        }
        CHECK(sup < prev_sup);
        prev_sup = sup;
        CHECK(md.m(0.0, 0.0) == 0.0);
    }

    // Finite value space: the remapped logistic keeps the interval [0, S].
    const MobilitySpec logi = make_mobility_logistic(1.0, 0.0);
    const MobilitySpec ld   = approximate_mobility(logi, 0.05, 0.0);
    CHECK(ld.s_finite);
    CHECK(ld.S(0.0) == doctest::Approx(1.0));
    CHECK(ld.m(0.0, 0.0) == 0.0);
    CHECK(ld.m(0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    for (double z : {0.1, 0.5, 0.9}) CHECK(ld.m(0.0, z) <= logi.m(0.0, z) + 1e-12);

    // The shift must stay below the peak of m.
    CHECK_THROWS(approximate_mobility(logi, 0.3, 0.0)); // sup m = 1/4 < 0.3
}

TEST_CASE("custom mobility falls back to difference-quotient derivatives") {
    const MobilitySpec cust = make_mobility_custom(
        [](double, double z) { return z * (1.0 - z); }, nullptr, nullptr,
        /*s_finite=*/true, TimeAffine{1.0, 0.0});
    CHECK(cust.dm(0.0, 0.3) == doctest::Approx(1.0 - 0.6).epsilon(1e-6));
    CHECK(cust.d2m(0.0, 0.3) == doctest::Approx(-2.0).epsilon(1e-4));
}
