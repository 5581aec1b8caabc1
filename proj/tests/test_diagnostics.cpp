#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmflow/config.hpp"
#include "mmflow/diagnostics.hpp"
#include "mmflow/jko.hpp"

using namespace mmflow;

namespace {

JkoConfig quick_cfg(double tau, double T) {
    JkoConfig jc;
    jc.tau = tau;
    jc.T   = T;
    jc.K   = 8;
    jc.tol = 1e-9;
    return jc;
}

DiscreteSolution pme_run(int N, double tau, double T) {
    const Grid1D g = make_grid(1.0, N);
    InitialConfig ic;
    ic.kind   = "step";
    ic.center = 0.42;
    const DensityField u0 = initial_from_config(ic, g);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = make_energy_quadratic_e1(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });
    return run_scheme(u0, es, ms, quick_cfg(tau, T));
}

DiscreteSolution e2_run(double tau, double T) {
    const Grid1D g = make_grid(1.0, 32);
    InitialConfig ic;
    ic.kind   = "step";
    ic.center = 0.42;
    const DensityField u0 = initial_from_config(ic, g);
    const MobilitySpec ms = make_mobility_logistic(2.0, 1.0);
    const EnergySpec   es = make_energy_quadratic_gradient(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });
    return run_scheme(u0, es, ms, quick_cfg(tau, T));
}

} // namespace

TEST_CASE("builtin test pairs: support, boundary compatibility, derivatives") {
    const double L = 1.3, T = 0.07;
    const auto pairs = builtin_test_pairs(L, T);
    REQUIRE(pairs.size() == 4);

    for (const TestFunctionPair& tf : pairs) {
        // Time factor has compact support strictly inside (0, T).
        CHECK(tf.psi(0.0) == 0.0);
        CHECK(tf.psi(T) == 0.0);
        CHECK(tf.psi(-0.01) == 0.0);
        CHECK(tf.psi(T + 0.01) == 0.0);
        double peak = 0.0;
        for (int k = 1; k < 40; ++k) peak = std::max(peak, tf.psi(T * k / 40.0));
        CHECK(peak > 0.5); // nontrivial in the interior

        // Space factor has zero slope at the walls (no-flux compatibility).
        CHECK(std::abs(tf.eta_dx(0.0)) < 1e-12);
        CHECK(std::abs(tf.eta_dx(L)) < 1e-12);

        // Analytic derivatives agree with central differences.
        const double h = 1e-6 * L;
        for (double x : {0.17 * L, 0.43 * L, 0.71 * L, 0.89 * L}) {
            const double d1 = (tf.eta(x + h) - tf.eta(x - h)) / (2.0 * h);
            const double d2 = (tf.eta(x + h) - 2.0 * tf.eta(x) + tf.eta(x - h)) / (h * h);
            CHECK(tf.eta_dx(x) == doctest::Approx(d1).epsilon(1e-5));
            CHECK(tf.eta_dxx(x) == doctest::Approx(d2).epsilon(2e-3));
        }
    }

    CHECK_THROWS(builtin_test_pairs(0.0, 1.0));
    CHECK_THROWS(builtin_test_pairs(1.0, -1.0));
}

TEST_CASE("weak residual is linear in the test pair") {
    const DiscreteSolution sol = pme_run(32, 2e-3, 0.02);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = make_energy_quadratic_e1(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });

    const auto pairs = builtin_test_pairs(1.0, 0.02);
    const TestFunctionPair& tf = pairs[0];

    TestFunctionPair scaled = tf;
    scaled.eta     = [&tf](double x) { return 3.0 * tf.eta(x); };
    scaled.eta_dx  = [&tf](double x) { return 3.0 * tf.eta_dx(x); };
    scaled.eta_dxx = [&tf](double x) { return 3.0 * tf.eta_dxx(x); };

    const double r  = weak_residual_signed(sol, es, ms, tf);
    const double r3 = weak_residual_signed(sol, es, ms, scaled);
    CHECK(r3 == doctest::Approx(3.0 * r).epsilon(1e-12));

    TestFunctionPair tscaled = tf;
    tscaled.psi = [&tf](double t) { return -2.0 * tf.psi(t); };
    CHECK(weak_residual_signed(sol, es, ms, tscaled) ==
          doctest::Approx(-2.0 * r).epsilon(1e-12));

    CHECK(weak_residual(sol, es, ms, tscaled) == doctest::Approx(2.0 * std::abs(r)));
}

TEST_CASE("expanded and trace codings of the gradient-energy flux agree") {
    const DiscreteSolution sol = e2_run(5e-3, 0.02);
    const MobilitySpec ms = make_mobility_logistic(2.0, 1.0);
    const EnergySpec   es = make_energy_quadratic_gradient(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });

    for (const TestFunctionPair& tf : builtin_test_pairs(1.0, 0.02)) {
        const double a = weak_residual_signed(sol, es, ms, tf);
        const double b = weak_residual_signed_trace_form(sol, es, ms, tf);
        CHECK(std::isfinite(a));
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("stationary run has vanishing residual") {
    // Uniform data with no potential: iterates stay put, the flux bracket
    // carries only solver noise and the time sum telescopes inside the
    // support of psi.
    const Grid1D g = make_grid(1.0, 32);
    const DensityField u0 = make_field(g, std::vector<double>(32, 1.0), true);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = make_energy_quadratic_e1(
        [](double) { return 0.0; }, [](double) { return 0.0; });
    const DiscreteSolution sol = run_scheme(u0, es, ms, quick_cfg(2e-3, 0.02));

    for (const TestFunctionPair& tf : builtin_test_pairs(1.0, 0.02))
        CHECK(weak_residual(sol, es, ms, tf) < 1e-7);
}

TEST_CASE("classical estimates on a moving run") {
    const DiscreteSolution sol = pme_run(32, 2e-3, 0.02);
    const EnergySpec es = make_energy_quadratic_e1(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });

    const ClassicalReport rep = check_classical_estimates(sol, es);
    CHECK(rep.energy_monotone);
    CHECK(rep.first_violation == -1);
    CHECK(rep.worst_margin <= 0.0);
    CHECK(rep.dist_sum > 0.0);
    CHECK(rep.dist_slack >= 0.0);
    CHECK(rep.c_hold > 0.0);
    CHECK(std::isfinite(rep.c_hold));
    const long n = static_cast<long>(sol.fields.size());
    CHECK(rep.pairs_checked == n * (n - 1) / 2);
}

TEST_CASE("entropy dissipation and a-priori reports stay finite") {
    const DiscreteSolution sol = pme_run(32, 2e-3, 0.02);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = make_energy_quadratic_e1(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });

    const EntropyDissipationReport ed = entropy_dissipation_check(sol, ms, es);
    CHECK(std::isfinite(ed.c_max));
    CHECK(ed.c_max >= 0.0);
    CHECK(std::isfinite(ed.accumulated_lhs));
    CHECK(ed.accumulated_lhs >= 0.0);
    CHECK(ed.skipped + static_cast<int>(ed.c_n.size()) == sol.steps());

    const AprioriReport ap = apriori_bounds(sol, es);
    CHECK(ap.all_finite);
    CHECK(ap.sup_l2 >= l2_norm(sol.grid, sol.fields[0].values) - 1e-12);
    CHECK(ap.accumulated > 0.0);
    CHECK(ap.sup_moment > 0.0);
}

TEST_CASE("residual quadrature reproduces a hand-computed value") {
    // A fabricated solution with constant fields makes every term of the
    // residual sum to closed form: the pairing telescopes against the
    // time differences of psi and the flux reduces to the potential term,
    //   R = sum_n (psi(n tau) - psi((n+1) tau)) <u, eta>
    //     + tau sum_n psi(n tau) * dx sum_i m f'' phi' eta'(x_i) ... with
    // u = 1, eta = x^2, phi' = 1/2, m = 2z:
    //   <u, eta> = 1/3 - dx^2/12 (midpoint defect), flux = 2 * 1/2 * L^2 = 1.
    const Grid1D g = make_grid(1.0, 8);
    DiscreteSolution sol;
    sol.grid = g;
    sol.tau  = 0.1;
    sol.times = {0.0, 0.1, 0.2, 0.3};
    for (int n = 0; n < 4; ++n)
        sol.fields.push_back(make_field(g, std::vector<double>(8, 1.0), false));
    sol.step_metrics.resize(3);

    const MobilitySpec ms = make_mobility_linear(2.0);
    const EnergySpec   es = make_energy_quadratic_e1(
        [](double x) { return 0.5 * x; }, [](double) { return 0.5; });

    TestFunctionPair tf;
    tf.name    = "hand";
    tf.eta     = [](double x) { return x * x; };
    tf.eta_dx  = [](double x) { return 2.0 * x; };
    tf.eta_dxx = [](double) { return 2.0; };
    tf.psi     = [](double t) { return t * (0.4 - t); };

    const double P = 1.0 / 3.0 - g.dx * g.dx / 12.0;
    // psi at 0.1, 0.2, 0.3, 0.4 is 0.03, 0.04, 0.03, 0.
    const double expected = (0.03 - 0.0) * P + 0.1 * (0.03 + 0.04 + 0.03) * 1.0;
    CHECK(weak_residual_signed(sol, es, ms, tf) ==
          doctest::Approx(expected).epsilon(1e-13));
}
