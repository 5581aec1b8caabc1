#include <doctest.h>

#include <cmath>
#include <string>

#include <json.hpp>

#include "mmflow/config.hpp"

using namespace mmflow;
using nlohmann::json;

namespace {

json base_config() {
    return json{
        {"job", "run"},
        {"domain", {{"L", 1.0}, {"N", 64}}},
        {"mobility", {{"kind", "logistic"}, {"S0", 4.0}, {"growth", 1.0}}},
        {"energy",
         {{"kind", "quadratic_e1"},
          {"phi", {{"kind", "linear"}, {"slope", 0.5}}}}},
        {"initial", {{"kind", "bump"}, {"center", 0.5}, {"width", 0.3}}},
        {"scheme", {{"tau", 1e-3}, {"T", 0.05}, {"K", 8}, {"tol", 1e-7}}},
    };
}

std::string pointer_of(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.pointer();
    }
    return "";
}

} // namespace

TEST_CASE("full config parses into the expected specs") {
    const ExperimentConfig cfg = parse_config(base_config());
    CHECK(cfg.job == JobKind::run);
    CHECK(cfg.N == 64);
    CHECK(cfg.L == doctest::Approx(1.0));
    CHECK(cfg.mobility.kind == "logistic");
    CHECK(cfg.mobility.S0 == doctest::Approx(4.0));
    CHECK(cfg.scheme.tau_list.size() == 1);
    CHECK(cfg.scheme.tau_list[0] == doctest::Approx(1e-3));
    CHECK(cfg.scheme.K == 8);

    const Grid1D g = grid_from_config(cfg);
    CHECK(g.N == 64);

    const MobilitySpec ms = mobility_from_config(cfg.mobility);
    CHECK(ms.s_finite);
    CHECK(ms.S(1.0) == doctest::Approx(5.0));

    const DensityField u0 = initial_from_config(cfg.initial, g);
    CHECK(mass(u0) == doctest::Approx(1.0).epsilon(1e-12));
    validate_initial_bound(u0, ms); // peak ~2.1 < S(0) = 4
}

TEST_CASE("schema violations carry JSON-pointer paths") {
    json j = base_config();
    j["domain"]["N"] = 2;
    CHECK(pointer_of(j) == "/domain/N");

    j = base_config();
    j["domain"]["L"] = -1.0;
    CHECK(pointer_of(j) == "/domain/L");

    j = base_config();
    j["mobility"]["S0"] = 0.0;
    CHECK(pointer_of(j) == "/mobility/S0");

    j = base_config();
    j["mobility"]["frobnicate"] = 1;
    CHECK(pointer_of(j) == "/mobility/frobnicate");

    j = base_config();
    j["scheme"]["tau_list"] = {1e-3, 5e-4};
    CHECK(pointer_of(j) == "/scheme/tau"); // both tau and tau_list given

    j = base_config();
    j["initial"]["width"] = 0.6;
    CHECK(pointer_of(j) == "/initial/width");

    j = base_config();
    j["energy"]["kind"] = "cubic";
    CHECK(pointer_of(j) == "/energy/kind");

    j = base_config();
    j["job"] = "interpolate";
    CHECK(pointer_of(j) == "/job");

    j = base_config();
    j["verbose"] = true;
    CHECK(pointer_of(j) == "/verbose");

    // Every top-level block is optional: the empty object is a valid run.
    CHECK(parse_config(json::object()).job == JobKind::run);
}

TEST_CASE("power-law exponent bounds") {
    json j = base_config();
    j["mobility"] = {{"kind", "power_eps"}, {"eps", 0.1}, {"alpha", 1.5}};
    CHECK(pointer_of(j) == "/mobility/alpha");

    j["mobility"] = {{"kind", "power_eps"}, {"eps", -0.1}, {"alpha", 0.5}};
    CHECK(pointer_of(j) == "/mobility/eps");

    j["mobility"] = {{"kind", "power"}, {"alpha", 0.5}, {"delta", 0.05}};
    const ExperimentConfig cfg = parse_config(j);
    const MobilitySpec ms = mobility_from_config(cfg.mobility);
    // Delta approximants get a distinguishing suffix on the kind.
    CHECK(ms.kind.find("delta") != std::string::npos);
}

TEST_CASE("distance jobs require a second endpoint") {
    json j = base_config();
    j["job"] = "distance";
    CHECK(pointer_of(j) == "/initial_b");

    j["initial_b"] = {{"kind", "uniform"}};
    const ExperimentConfig cfg = parse_config(j);
    CHECK(cfg.job == JobKind::distance);
    REQUIRE(cfg.initial_b.has_value());
    CHECK(cfg.initial_b->kind == "uniform");
}

TEST_CASE("echo round-trips to an equal config") {
    json j = base_config();
    j["scheme"].erase("tau");
    j["scheme"]["tau_list"] = {4e-3, 2e-3, 1e-3};
    j["job"] = "convergence-study";
    j["mobility"]["delta"] = 0.05;
    j["reference_dt_safety"] = 0.5;

    const ExperimentConfig cfg  = parse_config(j);
    const json             echo = config_echo(cfg);
    const ExperimentConfig back = parse_config(echo);
    CHECK(config_equal(cfg, back));
    CHECK(config_echo(back) == echo);
}

TEST_CASE("initial bound validation against the value space at start time") {
    json j = base_config();
    j["mobility"] = {{"kind", "logistic"}, {"S0", 1.0}, {"growth", 1.0}};

    const ExperimentConfig cfg = parse_config(j);
    const Grid1D           g   = grid_from_config(cfg);
    const MobilitySpec     ms  = mobility_from_config(cfg.mobility);

    // The normalized bump peaks above 2, but S(0) = 1.
    const DensityField u0 = initial_from_config(cfg.initial, g);
    CHECK_THROWS_AS(validate_initial_bound(u0, ms), ConfigError);

    // The uniform state stays exactly at the cap and is admitted.
    const DensityField uu = initial_from_config(InitialConfig{}, g);
    validate_initial_bound(uu, ms);
}

TEST_CASE("initial catalog: shapes, normalization, positivity") {
    const Grid1D g = make_grid(1.0, 128);

    for (const char* kind : {"uniform", "bump", "two-bump", "step"}) {
        InitialConfig ic;
        ic.kind = kind;
        const DensityField u = initial_from_config(ic, g);
        CHECK(mass(u) == doctest::Approx(1.0).epsilon(1e-12));
        for (double v : u.values) CHECK(v >= 0.0);
    }

    // The bump is supported strictly inside the domain.
    InitialConfig ic;
    ic.kind   = "bump";
    ic.center = 0.5;
    ic.width  = 0.25;
    const DensityField u = initial_from_config(ic, g);
    CHECK(u.values.front() == 0.0);
    CHECK(u.values.back() == 0.0);

    // Step data jumps at the requested center.
    ic.kind   = "step";
    ic.center = 0.5;
    const DensityField st = initial_from_config(ic, g);
    CHECK(st.values.front() > st.values.back());
}

TEST_CASE("malformed JSON files surface as config errors") {
    CHECK_THROWS_AS(load_config("/nonexistent/path/config.json"), ConfigError);
}
