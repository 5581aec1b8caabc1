#include "mmflow/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace mmflow {

using nlohmann::json;

namespace {

// Strict object reader: typed getters record which keys were consumed so
// that finish() can reject everything unexpected with its pointer path.
class ObjReader {
public:
    ObjReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(pointer(), "expected an object");
    }

    std::string pointer() const { return path_.empty() ? "/" : path_; }
    std::string pointer(const std::string& key) const { return path_ + "/" + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& require(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError(pointer(key), "missing required key");
        return j_.at(key);
    }
    const json* optional(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    double number(const std::string& key, double defv) {
        const json* v = optional(key);
        if (!v) return defv;
        if (!v->is_number()) throw ConfigError(pointer(key), "expected a number");
        return v->get<double>();
    }
    double number_req(const std::string& key) {
        const json& v = require(key);
        if (!v.is_number()) throw ConfigError(pointer(key), "expected a number");
        return v.get<double>();
    }
    int integer(const std::string& key, int defv) {
        const json* v = optional(key);
        if (!v) return defv;
        if (!v->is_number_integer()) throw ConfigError(pointer(key), "expected an integer");
        return v->get<int>();
    }
    std::string str(const std::string& key, const std::string& defv) {
        const json* v = optional(key);
        if (!v) return defv;
        if (!v->is_string()) throw ConfigError(pointer(key), "expected a string");
        return v->get<std::string>();
    }
    std::string str_req(const std::string& key) {
        const json& v = require(key);
        if (!v.is_string()) throw ConfigError(pointer(key), "expected a string");
        return v.get<std::string>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError(path_ + "/" + it.key(), "unknown key");
    }

private:
    const json&           j_;
    std::string           path_;
    std::set<std::string> seen_;
};

MobilityConfig parse_mobility(const json& j, const std::string& path) {
    ObjReader      r(j, path);
    MobilityConfig mc;
    mc.kind = r.str_req("kind");
    if (mc.kind == "logistic") {
        mc.S0     = r.number("S0", 1.0);
        mc.growth = r.number("growth", 0.0);
        if (!(mc.S0 > 0.0)) throw ConfigError(r.pointer("S0"), "must be positive");
        if (mc.growth < 0.0) throw ConfigError(r.pointer("growth"), "must be nonnegative");
    } else if (mc.kind == "power_eps") {
        mc.eps     = r.number("eps", 0.1);
        mc.alpha.a = r.number("alpha", 0.5);
        mc.alpha.b = r.number("alpha_growth", 0.0);
        if (!(mc.eps > 0.0)) throw ConfigError(r.pointer("eps"), "must be positive");
        if (!(mc.alpha.a > 0.0 && mc.alpha.a <= 1.0))
            throw ConfigError(r.pointer("alpha"), "must lie in (0, 1]");
    } else if (mc.kind == "power") {
        mc.alpha.a = r.number("alpha", 0.5);
        mc.alpha.b = r.number("alpha_growth", 0.0);
        if (!(mc.alpha.a > 0.0 && mc.alpha.a <= 1.0))
            throw ConfigError(r.pointer("alpha"), "must lie in (0, 1]");
    } else if (mc.kind == "linear") {
        mc.C = r.number("C", 1.0);
        if (!(mc.C > 0.0)) throw ConfigError(r.pointer("C"), "must be positive");
    } else {
        throw ConfigError(r.pointer("kind"),
                          "unknown mobility kind (logistic | power_eps | power | linear)");
    }
    if (const json* d = r.optional("delta")) {
        if (!d->is_number() || !(d->get<double>() > 0.0))
            throw ConfigError(r.pointer("delta"), "must be a positive number");
        mc.delta = d->get<double>();
    }
    r.finish();
    return mc;
}

PhiConfig parse_phi(const json& j, const std::string& path) {
    ObjReader r(j, path);
    PhiConfig pc;
    pc.kind = r.str("kind", "zero");
    if (pc.kind == "zero") {
        // no parameters
    } else if (pc.kind == "linear") {
        pc.slope = r.number("slope", 1.0);
    } else if (pc.kind == "quadratic-well") {
        pc.strength = r.number("strength", 1.0);
    } else if (pc.kind == "cosine") {
        pc.amplitude = r.number("amplitude", 1.0);
        pc.mode      = r.integer("mode", 1);
        if (pc.mode < 1) throw ConfigError(r.pointer("mode"), "must be >= 1");
    } else {
        throw ConfigError(r.pointer("kind"),
                          "unknown potential kind (zero | linear | quadratic-well | cosine)");
    }
    r.finish();
    return pc;
}

EnergyConfig parse_energy(const json& j, const std::string& path) {
    ObjReader    r(j, path);
    EnergyConfig ec;
    ec.kind = r.str("kind", "quadratic_e1");
    if (ec.kind != "quadratic_e1" && ec.kind != "quadratic_gradient" && ec.kind != "dirichlet")
        throw ConfigError(r.pointer("kind"),
                          "unknown energy kind (quadratic_e1 | quadratic_gradient | dirichlet)");
    if (const json* p = r.optional("phi")) ec.phi = parse_phi(*p, path + "/phi");
    r.finish();
    return ec;
}

InitialConfig parse_initial(const json& j, const std::string& path) {
    ObjReader     r(j, path);
    InitialConfig ic;
    ic.kind = r.str("kind", "uniform");
    if (ic.kind != "uniform" && ic.kind != "bump" && ic.kind != "two-bump" && ic.kind != "step")
        throw ConfigError(r.pointer("kind"),
                          "unknown initial kind (uniform | bump | two-bump | step)");
    ic.center = r.number("center", 0.5);
    ic.width  = r.number("width", 0.25);
    if (!(ic.center > 0.0 && ic.center < 1.0))
        throw ConfigError(r.pointer("center"), "must lie in (0, 1) as a fraction of L");
    if (!(ic.width > 0.0 && ic.width < 0.5))
        throw ConfigError(r.pointer("width"), "must lie in (0, 0.5) as a fraction of L");
    r.finish();
    return ic;
}

SchemeConfig parse_scheme(const json& j, const std::string& path) {
    ObjReader    r(j, path);
    SchemeConfig sc;
    const json*  tau  = r.optional("tau");
    const json*  list = r.optional("tau_list");
    if (tau && list)
        throw ConfigError(path + "/tau", "give either tau or tau_list, not both");
    if (tau) {
        if (!tau->is_number() || !(tau->get<double>() > 0.0))
            throw ConfigError(path + "/tau", "must be a positive number");
        sc.tau_list = {tau->get<double>()};
    } else if (list) {
        if (!list->is_array() || list->empty())
            throw ConfigError(path + "/tau_list", "must be a nonempty array");
        for (size_t i = 0; i < list->size(); ++i) {
            const json& v = (*list)[i];
            if (!v.is_number() || !(v.get<double>() > 0.0))
                throw ConfigError(path + "/tau_list/" + std::to_string(i),
                                  "must be a positive number");
            sc.tau_list.push_back(v.get<double>());
        }
    } else {
        sc.tau_list = {1e-3};
    }
    sc.T   = r.number("T", 0.1);
    sc.K   = r.integer("K", 16);
    sc.tol = r.number("tol", 1e-8);
    sc.max_iterations = r.integer("max_iterations", 200000);
    if (!(sc.T > 0.0)) throw ConfigError(r.pointer("T"), "must be positive");
    if (sc.K < 2) throw ConfigError(r.pointer("K"), "must be >= 2");
    if (!(sc.tol > 0.0)) throw ConfigError(r.pointer("tol"), "must be positive");
    if (sc.max_iterations < 100) throw ConfigError(r.pointer("max_iterations"), "must be >= 100");
    r.finish();
    return sc;
}

} // namespace

ExperimentConfig parse_config(const json& j) {
    ObjReader        r(j, "");
    ExperimentConfig cfg;

    const std::string job = r.str("job", "run");
    if (job == "run") cfg.job = JobKind::run;
    else if (job == "convergence-study") cfg.job = JobKind::convergence_study;
    else if (job == "compare-reference") cfg.job = JobKind::compare_reference;
    else if (job == "distance") cfg.job = JobKind::distance;
    else if (job == "check-admissibility") cfg.job = JobKind::check_admissibility;
    else
        throw ConfigError("/job", "unknown job (run | convergence-study | compare-reference | "
                                  "distance | check-admissibility)");

    if (const json* d = r.optional("domain")) {
        ObjReader rd(*d, "/domain");
        cfg.L = rd.number("L", 1.0);
        cfg.N = rd.integer("N", 64);
        rd.finish();
        if (!(cfg.L > 0.0)) throw ConfigError("/domain/L", "must be positive");
        if (cfg.N < 4) throw ConfigError("/domain/N", "must be >= 4");
    }
    if (const json* m = r.optional("mobility")) cfg.mobility = parse_mobility(*m, "/mobility");
    if (const json* e = r.optional("energy")) cfg.energy = parse_energy(*e, "/energy");
    if (const json* i = r.optional("initial")) cfg.initial = parse_initial(*i, "/initial");
    if (const json* i = r.optional("initial_b"))
        cfg.initial_b = parse_initial(*i, "/initial_b");
    if (const json* s = r.optional("scheme")) cfg.scheme = parse_scheme(*s, "/scheme");
    cfg.reference_dt_safety = r.number("reference_dt_safety", 1.0);
    if (!(cfg.reference_dt_safety > 0.0 && cfg.reference_dt_safety <= 1.0))
        throw ConfigError("/reference_dt_safety", "must lie in (0, 1]");
    r.finish();

    if (cfg.job == JobKind::distance && !cfg.initial_b)
        throw ConfigError("/initial_b", "the distance job needs a second endpoint");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("/", "cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("/", std::string("JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

json config_echo(const ExperimentConfig& cfg) {
    json j;
    j["job"]    = job_kind_name(cfg.job);
    j["domain"] = {{"L", cfg.L}, {"N", cfg.N}};

    json m;
    m["kind"] = cfg.mobility.kind;
    if (cfg.mobility.kind == "logistic") {
        m["S0"]     = cfg.mobility.S0;
        m["growth"] = cfg.mobility.growth;
    } else if (cfg.mobility.kind == "power_eps") {
        m["eps"]          = cfg.mobility.eps;
        m["alpha"]        = cfg.mobility.alpha.a;
        m["alpha_growth"] = cfg.mobility.alpha.b;
    } else if (cfg.mobility.kind == "power") {
        m["alpha"]        = cfg.mobility.alpha.a;
        m["alpha_growth"] = cfg.mobility.alpha.b;
    } else if (cfg.mobility.kind == "linear") {
        m["C"] = cfg.mobility.C;
    }
    if (cfg.mobility.delta) m["delta"] = *cfg.mobility.delta;
    j["mobility"] = m;

    json phi;
    phi["kind"] = cfg.energy.phi.kind;
    if (cfg.energy.phi.kind == "linear") phi["slope"] = cfg.energy.phi.slope;
    if (cfg.energy.phi.kind == "quadratic-well") phi["strength"] = cfg.energy.phi.strength;
    if (cfg.energy.phi.kind == "cosine") {
        phi["amplitude"] = cfg.energy.phi.amplitude;
        phi["mode"]      = cfg.energy.phi.mode;
    }
    j["energy"] = {{"kind", cfg.energy.kind}, {"phi", phi}};

    auto initial_json = [](const InitialConfig& ic) {
        return json{{"kind", ic.kind}, {"center", ic.center}, {"width", ic.width}};
    };
    j["initial"] = initial_json(cfg.initial);
    if (cfg.initial_b) j["initial_b"] = initial_json(*cfg.initial_b);

    j["scheme"] = {{"tau_list", cfg.scheme.tau_list}, {"T", cfg.scheme.T},
                   {"K", cfg.scheme.K},               {"tol", cfg.scheme.tol},
                   {"max_iterations", cfg.scheme.max_iterations}};
    j["reference_dt_safety"] = cfg.reference_dt_safety;
    return j;
}

bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b) {
    return config_echo(a) == config_echo(b);
}

Grid1D grid_from_config(const ExperimentConfig& cfg) { return make_grid(cfg.L, cfg.N); }

MobilitySpec mobility_from_config(const MobilityConfig& mc) {
    MobilitySpec sp;
    if (mc.kind == "logistic") sp = make_mobility_logistic(mc.S0, mc.growth);
    else if (mc.kind == "power_eps") sp = make_mobility_power_eps(mc.eps, mc.alpha);
    else if (mc.kind == "power") sp = make_mobility_power(mc.alpha);
    else if (mc.kind == "linear") sp = make_mobility_linear(mc.C);
    else throw ConfigError("/mobility/kind", "unknown mobility kind");
    if (mc.delta) sp = approximate_mobility(sp, *mc.delta, 0.0);
    return sp;
}

EnergySpec energy_from_config(const EnergyConfig& ec, double L) {
    std::function<double(double)> phi, phi_dx;
    const PhiConfig&              pc = ec.phi;
    if (pc.kind == "zero") {
        phi    = [](double) { return 0.0; };
        phi_dx = [](double) { return 0.0; };
    } else if (pc.kind == "linear") {
        const double s = pc.slope;
        phi            = [s](double x) { return s * x; };
        phi_dx         = [s](double) { return s; };
    } else if (pc.kind == "quadratic-well") {
        const double s = pc.strength, c = 0.5 * L;
        phi    = [s, c](double x) { return s * (x - c) * (x - c); };
        phi_dx = [s, c](double x) { return 2.0 * s * (x - c); };
    } else if (pc.kind == "cosine") {
        const double A = pc.amplitude;
        const double k = pc.mode * 3.14159265358979323846 / L;
        phi    = [A, k](double x) { return A * std::cos(k * x); };
        phi_dx = [A, k](double x) { return -A * k * std::sin(k * x); };
    } else {
        throw ConfigError("/energy/phi/kind", "unknown potential kind");
    }

    if (ec.kind == "quadratic_e1") return make_energy_quadratic_e1(phi, phi_dx);
    if (ec.kind == "quadratic_gradient") return make_energy_quadratic_gradient(phi, phi_dx);
    if (ec.kind == "dirichlet") return make_energy_dirichlet(phi, phi_dx);
    throw ConfigError("/energy/kind", "unknown energy kind");
}

DensityField initial_from_config(const InitialConfig& ic, const Grid1D& g) {
    auto bump = [](double x, double c, double r) {
        const double s = (x - c) / r;
        const double q = 1.0 - s * s;
        return (q > 1e-14) ? std::exp(1.0 - 1.0 / q) : 0.0;
    };
    std::vector<double> v(g.N, 0.0);
    for (int i = 0; i < g.N; ++i) {
        const double x = g.cell_center(i);
        if (ic.kind == "uniform") v[i] = 1.0;
        else if (ic.kind == "bump") v[i] = bump(x, ic.center * g.L, ic.width * g.L);
        else if (ic.kind == "two-bump")
            v[i] = bump(x, 0.3 * g.L, ic.width * g.L) + bump(x, 0.7 * g.L, ic.width * g.L);
        else if (ic.kind == "step") v[i] = (x < ic.center * g.L) ? 1.0 : 0.25;
    }
    return make_field(g, v, /*normalize=*/true);
}

void validate_initial_bound(const DensityField& u0, const MobilitySpec& mspec) {
    const double S = mspec.S(0.0);
    if (!std::isfinite(S)) return;
    for (int i = 0; i < u0.grid.N; ++i) {
        if (u0.values[i] > S + 1e-8)
            throw ConfigError("/initial",
                              "the initial state must satisfy 0 <= u0 <= S(0); cell " +
                                  std::to_string(i) + " holds " +
                                  std::to_string(u0.values[i]) + " but S(0) = " +
                                  std::to_string(S));
    }
}

std::string job_kind_name(JobKind k) {
    switch (k) {
        case JobKind::run: return "run";
        case JobKind::convergence_study: return "convergence-study";
        case JobKind::compare_reference: return "compare-reference";
        case JobKind::distance: return "distance";
        case JobKind::check_admissibility: return "check-admissibility";
    }
    return "run";
}

} // namespace mmflow
