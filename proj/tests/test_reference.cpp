#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmflow/energy.hpp"
#include "mmflow/grid.hpp"
#include "mmflow/mobility.hpp"
#include "mmflow/reference.hpp"

using namespace mmflow;

namespace {

EnergySpec pme_energy() {
    return make_energy_quadratic_e1([](double) { return 0.0; },
                                    [](double) { return 0.0; });
}

// Relative L2 gap between a trajectory snapshot and an exact profile.
double rel_l2_gap(const DensityField& a, const DensityField& b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        num += d * d;
        den += b.values[i] * b.values[i];
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_CASE("stable step formulas") {
    const Grid1D g = make_grid(1.0, 64);
    CHECK(stable_dt(g, 2.0, 3.0, 2) ==
          doctest::Approx(0.4 * g.dx * g.dx / 6.0).epsilon(1e-14));
    CHECK(stable_dt(g, 2.0, 3.0, 4) ==
          doctest::Approx(0.1 * std::pow(g.dx, 4) / 6.0).epsilon(1e-14));
    CHECK_THROWS(stable_dt(g, 2.0, 3.0, 3));
}

TEST_CASE("self-similar source solution is propagated correctly") {
    // With the profile at internal time t0' as datum, the solution of
    // u_t = (u u_x)_x at time t is the profile at internal time t0' + t/2.
    const Grid1D g = make_grid(1.0, 128);
    const double t0p = 0.006, T = 0.01;
    const DensityField u0   = barenblatt_profile(g, t0p, 0.5);
    const DensityField goal = barenblatt_profile(g, t0p + T / 2.0, 0.5);

    CHECK(mass(u0) == doctest::Approx(1.0).epsilon(1e-3)); // truncated tails only

    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = pme_energy();
    const double m_sup = mobility_max_on(ms, 0.0, 0.0, 1.05 * *std::max_element(
                                             u0.values.begin(), u0.values.end()));
    const double dt = stable_dt(g, 1.0, m_sup, 2);

    const Trajectory tr = reference_solve(u0, es, ms, T, dt, {T}, 2);
    REQUIRE(tr.fields.size() == 1); // only the requested output time
    CHECK(tr.mass_drift < 1e-12);

    const double gap = rel_l2_gap(tr.fields.back(), goal);
    CHECK(gap < 0.02); // front-capturing accuracy at N = 128

    // The same run on a coarser grid is worse: the error is discretization,
    // not time stepping.
    const Grid1D g2 = make_grid(1.0, 64);
    const DensityField u02   = barenblatt_profile(g2, t0p, 0.5);
    const DensityField goal2 = barenblatt_profile(g2, t0p + T / 2.0, 0.5);
    const double dt2 = stable_dt(g2, 1.0, m_sup, 2);
    const Trajectory tr2 = reference_solve(u02, es, ms, T, dt2, {T}, 2);
    CHECK(rel_l2_gap(tr2.fields.back(), goal2) > gap);
}

TEST_CASE("flux form conserves mass to rounding") {
    const Grid1D g = make_grid(1.0, 64);
    std::vector<double> s(64);
    for (int i = 0; i < 64; ++i) {
        const double x = g.cell_center(i);
        s[static_cast<size_t>(i)] = 0.3 + std::sin(3.0 * x) * std::sin(3.0 * x);
    }
    const DensityField u0 = make_field(g, s, true);
    const MobilitySpec ms = make_mobility_logistic(4.0, 0.0);
    const EnergySpec   es = pme_energy();
    const double dt = stable_dt(g, 1.0, 4.0, 2);

    const Trajectory tr = reference_solve(u0, es, ms, 0.01, dt, {0.005, 0.01}, 2);
    CHECK(tr.mass_drift < 1e-12);
    for (const DensityField& f : tr.fields)
        CHECK(mass(f) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("output times are hit exactly") {
    const Grid1D g = make_grid(1.0, 32);
    const DensityField u0 = make_field(g, std::vector<double>(32, 1.0), true);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = pme_energy();

    // dt deliberately incommensurate with the output times.
    const Trajectory tr = reference_solve(u0, es, ms, 0.01, 2.3e-4,
                                          {0.0031, 0.0077, 0.01}, 2);
    REQUIRE(tr.times.size() == 3);
    CHECK(tr.times[0] == doctest::Approx(0.0031).epsilon(1e-14));
    CHECK(tr.times[1] == doctest::Approx(0.0077).epsilon(1e-14));
    CHECK(tr.times[2] == doctest::Approx(0.01).epsilon(1e-14));
}

TEST_CASE("instability is detected and aborts loudly") {
    const Grid1D g = make_grid(1.0, 32);
    std::vector<double> s(32);
    for (int i = 0; i < 32; ++i)
        s[static_cast<size_t>(i)] = 1.0 + 0.5 * ((i % 2) ? 1.0 : -1.0);
    const DensityField u0 = make_field(g, s, true);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = pme_energy();

    const double dt_ok = stable_dt(g, 1.0, 1.6, 2);
    CHECK_THROWS(reference_solve(u0, es, ms, 0.01, 50.0 * dt_ok, {0.01}, 2));
}

TEST_CASE("trajectory comparison helpers") {
    const Grid1D g = make_grid(1.0, 32);
    const DensityField u0 = make_field(g, std::vector<double>(32, 1.0), true);
    const MobilitySpec ms = make_mobility_linear(1.0);
    const EnergySpec   es = pme_energy();
    const double dt = stable_dt(g, 1.0, 1.1, 2);

    const Trajectory tr = reference_solve(u0, es, ms, 0.01, dt, {0.005, 0.01}, 2);
    const ErrorReport self = compare_trajectories(tr, tr);
    for (double e : self.l2) CHECK(e == 0.0);
    CHECK(self.aggregated_rel_l2_in_time == 0.0);

    Trajectory shifted = tr;
    for (DensityField& f : shifted.fields)
        for (double& v : f.values) v += 0.25;
    const ErrorReport off = compare_trajectories(shifted, tr);
    for (double e : off.linf) CHECK(e == doctest::Approx(0.25).epsilon(1e-12));
    for (double e : off.l2) CHECK(e == doctest::Approx(0.25).epsilon(1e-12));
}
