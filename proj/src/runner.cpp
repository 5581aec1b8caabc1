#include "mmflow/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mmflow/diagnostics.hpp"
#include "mmflow/jko.hpp"
#include "mmflow/reference.hpp"
#include "mmflow/transport.hpp"

namespace mmflow {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << s;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// RFC 4180 rows: comma-separated, CRLF line endings.  All fields here are
// numbers or plain identifiers, so no quoting is ever needed.
class CsvWriter {
public:
    explicit CsvWriter(std::string header) { row(std::move(header)); }
    void row(std::string line) {
        buf_ += line;
        buf_ += "\r\n";
    }
    template <typename... Ts> void cells(const Ts&... vs) {
        std::string line;
        ((line += cell(vs), line += ','), ...);
        if (!line.empty()) line.pop_back();
        row(std::move(line));
    }
    const std::string& str() const { return buf_; }

private:
    static std::string cell(double v) { return format_double(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(const std::string& s) { return s; }
    std::string buf_;
};

void write_trajectory_csv(const fs::path& p, const DiscreteSolution& sol) {
    CsvWriter csv("t,x,u");
    for (size_t n = 0; n < sol.fields.size(); ++n)
        for (int i = 0; i < sol.grid.N; ++i)
            csv.cells(sol.times[n], sol.grid.cell_center(i), sol.fields[n].values[i]);
    write_text(p, csv.str());
}

void write_trajectory_csv(const fs::path& p, const Trajectory& tr) {
    CsvWriter csv("t,x,u");
    for (size_t n = 0; n < tr.fields.size(); ++n)
        for (int i = 0; i < tr.grid.N; ++i)
            csv.cells(tr.times[n], tr.grid.cell_center(i), tr.fields[n].values[i]);
    write_text(p, csv.str());
}

void write_metrics_csv(const fs::path& p, const DiscreteSolution& sol) {
    CsvWriter csv("n,t,W2n_sq,energy,entropy,mass,moment,iters");
    for (int n = 1; n <= sol.steps(); ++n) {
        const StepMetrics& sm = sol.step_metrics[n - 1];
        csv.cells(n, sol.times[n], sm.w2_sq, sm.energy_after, sm.entropy_after,
                  sm.mass_after, second_moment(sol.fields[n]), sm.iterations);
    }
    write_text(p, csv.str());
}

json classical_json(const ClassicalReport& r) {
    return json{{"energy_monotone", r.energy_monotone},
                {"first_violation", r.first_violation},
                {"worst_margin", r.worst_margin},
                {"dist_sum", r.dist_sum},
                {"dist_bound", r.dist_bound},
                {"dist_slack", r.dist_slack},
                {"c_hold", r.c_hold},
                {"pairs_checked", r.pairs_checked}};
}

json entropy_json(const EntropyDissipationReport& r) {
    return json{{"c_n", r.c_n},
                {"c_max", r.c_max},
                {"skipped", r.skipped},
                {"accumulated_lhs", r.accumulated_lhs},
                {"entropy_initial", r.entropy_initial},
                {"entropy_final", r.entropy_final}};
}

json apriori_json(const AprioriReport& r) {
    return json{{"sup_l2", r.sup_l2},
                {"sup_h1", r.sup_h1},
                {"sup_moment", r.sup_moment},
                {"accumulated", r.accumulated},
                {"all_finite", r.all_finite}};
}

json condition_json(const ConditionReport& c) {
    json j{{"verdict", verdict_name(c.verdict)}, {"note", c.note}};
    if (c.has_witness) j["witness"] = {{"t", c.witness_t}, {"z", c.witness_z}};
    return j;
}

// One scheme run plus the whole diagnostics battery and the hard checks
// every run must satisfy regardless of job.
struct RunResult {
    DiscreteSolution         sol;
    ClassicalReport          classical;
    EntropyDissipationReport entropy;
    AprioriReport            apriori;
    std::vector<std::pair<std::string, double>> weak; // per builtin test pair
    bool        hard_pass = true;
    std::string failure;
};

RunResult run_one(const ExperimentConfig& cfg, double tau, const Grid1D& g,
                  const MobilitySpec& mspec, const EnergySpec& espec,
                  const DensityField& u0) {
    RunResult rr;
    JkoConfig jc;
    jc.tau            = tau;
    jc.T              = cfg.scheme.T;
    jc.K              = cfg.scheme.K;
    jc.tol            = cfg.scheme.tol;
    jc.max_iterations = cfg.scheme.max_iterations;
    rr.sol            = run_scheme(u0, espec, mspec, jc);

    rr.classical = check_classical_estimates(rr.sol, espec);
    rr.entropy   = entropy_dissipation_check(rr.sol, mspec, espec);
    rr.apriori   = apriori_bounds(rr.sol, espec);
    for (const TestFunctionPair& tf : builtin_test_pairs(g.L, cfg.scheme.T))
        rr.weak.emplace_back(tf.name, weak_residual(rr.sol, espec, mspec, tf));

    auto fail = [&](const std::string& msg) {
        if (rr.hard_pass) rr.failure = msg;
        rr.hard_pass = false;
    };
    for (int n = 1; n <= rr.sol.steps(); ++n) {
        const StepMetrics& sm = rr.sol.step_metrics[n - 1];
        if (!sm.converged)
            fail("step " + std::to_string(n) + " did not reach the tolerance");
        if (std::abs(sm.mass_after - 1.0) > 1e-8)
            fail("step " + std::to_string(n) + " lost mass: " +
                 format_double(sm.mass_after));
        const double S = mspec.S(rr.sol.times[n]);
        for (double v : rr.sol.fields[n].values) {
            if (v < -1e-10 || v > S + 1e-8) {
                fail("step " + std::to_string(n) + " left the box [0, S]: value " +
                     format_double(v));
                break;
            }
        }
    }
    if (!rr.classical.energy_monotone)
        fail("energy increased at step " + std::to_string(rr.classical.first_violation) +
             " by " + format_double(rr.classical.worst_margin));
    if (!rr.apriori.all_finite) fail("a diagnostic norm is not finite");
    return rr;
}

json run_result_json(const RunResult& rr, double tau) {
    json wres = json::array();
    for (auto& [name, value] : rr.weak) wres.push_back({{"name", name}, {"value", value}});
    return json{{"tau", tau},
                {"steps", rr.sol.steps()},
                {"classical", classical_json(rr.classical)},
                {"entropy_dissipation", entropy_json(rr.entropy)},
                {"apriori", apriori_json(rr.apriori)},
                {"weak_residuals", wres},
                {"hard_pass", rr.hard_pass},
                {"failure", rr.failure}};
}

// Upper bound for m(t, u) over a run: sample times in [0, T], cap the value
// range by S(t) when finite and by a margin above the initial maximum
// otherwise (zero-flux diffusion does not push cell values above the initial
// maximum; the margin absorbs transients).
double mobility_sup_over_run(const MobilitySpec& mspec, double T,
                             const DensityField& u0) {
    const double umax = *std::max_element(u0.values.begin(), u0.values.end());
    double       msup = 0.0;
    for (int i = 0; i <= 16; ++i) {
        const double t    = T * i / 16.0;
        const double S    = mspec.S(t);
        const double zcap = std::isfinite(S) ? S : 1.5 * umax;
        msup              = std::max(msup, mobility_max_on(mspec, t, 0.0, zcap));
    }
    return msup;
}

int job_run(const ExperimentConfig& cfg, const fs::path& dir, json& summary,
            std::string& failure) {
    const Grid1D       g     = grid_from_config(cfg);
    const MobilitySpec mspec = mobility_from_config(cfg.mobility);
    const EnergySpec   espec = energy_from_config(cfg.energy, cfg.L);
    const DensityField u0    = initial_from_config(cfg.initial, g);
    validate_initial_bound(u0, mspec);

    const RunResult rr = run_one(cfg, cfg.scheme.tau_list.front(), g, mspec, espec, u0);

    write_trajectory_csv(dir / "trajectory.csv", rr.sol);
    write_metrics_csv(dir / "metrics.csv", rr.sol);
    write_json(dir / "diagnostics.json", run_result_json(rr, rr.sol.tau));

    summary["verdicts"] = {{"hard_pass", rr.hard_pass},
                           {"energy_monotone", rr.classical.energy_monotone},
                           {"dist_slack_nonnegative", rr.classical.dist_slack >= 0.0},
                           {"all_finite", rr.apriori.all_finite}};
    failure = rr.failure;
    return rr.hard_pass ? 0 : 1;
}

int job_study(const ExperimentConfig& cfg, const fs::path& dir, json& summary,
              std::string& failure) {
    const Grid1D       g     = grid_from_config(cfg);
    const MobilitySpec mspec = mobility_from_config(cfg.mobility);
    const EnergySpec   espec = energy_from_config(cfg.energy, cfg.L);
    const DensityField u0    = initial_from_config(cfg.initial, g);
    validate_initial_bound(u0, mspec);

    // Runs are independent per tau; they execute sequentially here, which
    // trivially respects any thread bound (the transport workspace is not
    // shareable across runs anyway).
    std::vector<RunResult> results;
    for (double tau : cfg.scheme.tau_list)
        results.push_back(run_one(cfg, tau, g, mspec, espec, u0));

    const auto pairs = builtin_test_pairs(g.L, cfg.scheme.T);
    CsvWriter  csv("tau,steps,energy_final,dist_sum,dist_slack,c_hold,accumulated,"
                   "wres_1,wres_2,wres_3,wres_4");
    for (size_t r = 0; r < results.size(); ++r) {
        const RunResult& rr = results[r];
        const double     ef = rr.sol.step_metrics.empty()
                                  ? 0.0
                                  : rr.sol.step_metrics.back().energy_after;
        csv.cells(cfg.scheme.tau_list[r], rr.sol.steps(), ef, rr.classical.dist_sum,
                  rr.classical.dist_slack, rr.classical.c_hold, rr.apriori.accumulated,
                  rr.weak[0].second, rr.weak[1].second, rr.weak[2].second,
                  rr.weak[3].second);
    }
    write_text(dir / "study.csv", csv.str());

    json diag;
    diag["runs"] = json::array();
    for (size_t r = 0; r < results.size(); ++r)
        diag["runs"].push_back(run_result_json(results[r], cfg.scheme.tau_list[r]));
    json ratios;
    for (size_t p = 0; p < pairs.size(); ++p) {
        std::vector<double> rat;
        for (size_t r = 0; r + 1 < results.size(); ++r) {
            const double a = results[r].weak[p].second, b = results[r + 1].weak[p].second;
            rat.push_back(a > 0.0 ? b / a : std::numeric_limits<double>::quiet_NaN());
        }
        ratios[pairs[p].name] = rat;
    }
    diag["residual_ratios"] = ratios;
    write_json(dir / "diagnostics.json", diag);

    write_trajectory_csv(dir / "trajectory.csv", results.back().sol);
    write_metrics_csv(dir / "metrics.csv", results.back().sol);

    bool all_pass = true;
    for (const RunResult& rr : results) {
        if (!rr.hard_pass) {
            all_pass = false;
            if (failure.empty()) failure = rr.failure;
        }
    }
    summary["verdicts"] = {{"all_runs_pass", all_pass}};
    return all_pass ? 0 : 1;
}

int job_compare(const ExperimentConfig& cfg, const fs::path& dir, json& summary,
                std::string& failure) {
    const Grid1D       g     = grid_from_config(cfg);
    const MobilitySpec mspec = mobility_from_config(cfg.mobility);
    const EnergySpec   espec = energy_from_config(cfg.energy, cfg.L);
    const DensityField u0    = initial_from_config(cfg.initial, g);
    validate_initial_bound(u0, mspec);

    const double tau_min =
        *std::min_element(cfg.scheme.tau_list.begin(), cfg.scheme.tau_list.end());
    std::vector<double> out_times;
    const int           n_out = static_cast<int>(std::ceil(cfg.scheme.T / tau_min - 1e-12));
    for (int n = 0; n <= n_out; ++n)
        out_times.push_back(std::min(n * tau_min, cfg.scheme.T));

    const int    order = espec.variant == EnergyVariant::E2 ? 4 : 2;
    const double msup  = mobility_sup_over_run(mspec, cfg.scheme.T, u0);
    const double dt    = stable_dt(g, espec.gamma1, msup, order) * cfg.reference_dt_safety;
    const Trajectory ref =
        reference_solve(u0, espec, mspec, cfg.scheme.T, dt, out_times, order);

    std::vector<RunResult>   results;
    std::vector<ErrorReport> errors;
    for (double tau : cfg.scheme.tau_list) {
        results.push_back(run_one(cfg, tau, g, mspec, espec, u0));
        errors.push_back(compare_solution_to_trajectory(results.back().sol, ref));
    }

    CsvWriter csv("tau,aggregated_l2,aggregated_rel_l2,l2_final");
    for (size_t r = 0; r < errors.size(); ++r)
        csv.cells(cfg.scheme.tau_list[r], errors[r].aggregated_l2_in_time,
                  errors[r].aggregated_rel_l2_in_time, errors[r].l2.back());
    write_text(dir / "compare.csv", csv.str());

    json diag;
    diag["reference"] = {{"dt", ref.dt_used},
                         {"mass_drift", ref.mass_drift},
                         {"min_value_seen", ref.min_value_seen},
                         {"clip_count", ref.clip_count},
                         {"clip_total", ref.clip_total}};
    diag["runs"]      = json::array();
    for (size_t r = 0; r < results.size(); ++r) {
        json jr                  = run_result_json(results[r], cfg.scheme.tau_list[r]);
        jr["aggregated_l2"]      = errors[r].aggregated_l2_in_time;
        jr["aggregated_rel_l2"]  = errors[r].aggregated_rel_l2_in_time;
        diag["runs"].push_back(jr);
    }
    write_json(dir / "diagnostics.json", diag);

    write_trajectory_csv(dir / "trajectory.csv", results.back().sol);
    write_metrics_csv(dir / "metrics.csv", results.back().sol);
    write_trajectory_csv(dir / "reference.csv", ref);

    bool all_pass = true, finite = true, decreasing = true;
    for (size_t r = 0; r < results.size(); ++r) {
        if (!results[r].hard_pass) {
            all_pass = false;
            if (failure.empty()) failure = results[r].failure;
        }
        if (!std::isfinite(errors[r].aggregated_rel_l2_in_time)) finite = false;
        if (r > 0 && !(errors[r].aggregated_rel_l2_in_time <
                       errors[r - 1].aggregated_rel_l2_in_time))
            decreasing = false;
    }
    if (!finite && failure.empty()) failure = "comparison error is not finite";
    summary["verdicts"] = {{"all_runs_pass", all_pass},
                           {"errors_finite", finite},
                           {"error_decreasing", decreasing}};
    return (all_pass && finite) ? 0 : 1;
}

int job_distance(const ExperimentConfig& cfg, const fs::path& dir, json& summary,
                 std::string& failure) {
    const Grid1D       g     = grid_from_config(cfg);
    const MobilitySpec mspec = mobility_from_config(cfg.mobility);
    const DensityField a     = initial_from_config(cfg.initial, g);
    const DensityField b     = initial_from_config(*cfg.initial_b, g);
    validate_initial_bound(a, mspec);
    validate_initial_bound(b, mspec);

    // The two endpoints are compared in the metric frozen at time 0.
    const MetricResult r = bb_distance_squared(mspec, 0.0, a, b, cfg.scheme.K,
                                               cfg.scheme.tol, cfg.scheme.max_iterations);

    json d{{"value", r.value},
           {"distance", r.infeasible ? std::numeric_limits<double>::infinity()
                                     : std::sqrt(std::max(0.0, r.value))},
           {"infeasible", r.infeasible},
           {"iterations", r.stats.iterations},
           {"continuity_residual", r.stats.continuity_residual},
           {"converged", r.stats.converged},
           {"K", cfg.scheme.K}};
    if (cfg.mobility.kind == "linear") {
        // For m = C z the metric is the classical one scaled by 1/C, which the
        // quantile formula computes exactly.
        const double exact = w2_squared_1d(a, b) / cfg.mobility.C;
        d["quantile_value"] = exact;
        d["relative_gap"]   = exact > 0.0 ? std::abs(r.value - exact) / exact : 0.0;
    }
    write_json(dir / "distance.json", d);

    const bool ok = !r.infeasible && r.stats.converged;
    if (!ok) failure = r.infeasible ? "endpoints are not feasible for the value bound"
                                    : "the transport solver did not converge";
    summary["verdicts"] = {{"converged", r.stats.converged}, {"feasible", !r.infeasible}};
    return ok ? 0 : 1;
}

int job_admissibility(const ExperimentConfig& cfg, const fs::path& dir, json& summary,
                      std::string& failure) {
    const MobilitySpec  mspec = mobility_from_config(cfg.mobility);
    std::vector<double> ts;
    for (int i = 0; i <= 8; ++i) ts.push_back(cfg.scheme.T * i / 8.0);
    const AdmissibilityReport rep =
        check_admissibility(mspec, ts, std::max(64, cfg.N));

    json j;
    j["kind"]           = mspec.kind;
    j["support"]        = condition_json(rep.support);
    j["positivity"]     = condition_json(rep.positivity);
    j["concavity"]      = condition_json(rep.concavity);
    j["lipschitz_t"]    = condition_json(rep.lipschitz_t);
    j["slope_bound"]    = condition_json(rep.slope_bound);
    j["semiconcavity"]  = condition_json(rep.semiconcavity);
    j["entropy_exists"] = condition_json(rep.entropy_exists);
    j["boundary_decay"] = condition_json(rep.boundary_decay);
    j["t_samples"]      = rep.t_samples;
    j["slope_sup_of_t"]    = rep.slope_sup_of_t;
    j["semiconc_sup_of_t"] = rep.semiconc_sup_of_t;
    j["C_estimate"]     = rep.C_estimate;
    j["C_finite"]       = rep.C_finite;
    j["entropy_growth_exponent"] = rep.entropy_growth_exponent;
    j["core_conditions_pass"]    = rep.core_conditions_pass();
    write_json(dir / "admissibility.json", j);

    const bool ok = rep.core_conditions_pass();
    if (!ok) failure = "the mobility violates at least one structural condition";
    summary["verdicts"] = {{"core_conditions_pass", ok}};
    return ok ? 0 : 1;
}

} // namespace

RunOutcome execute(const ExperimentConfig& cfg, const std::string& out_dir, int threads) {
    (void)threads; // runs are sequential; see job_study
    const fs::path dir(out_dir);
    fs::create_directories(dir);

    RunOutcome out;
    json       summary;
    summary["config"] = config_echo(cfg);
    summary["job"]    = job_kind_name(cfg.job);
    try {
        switch (cfg.job) {
            case JobKind::run:
                out.exit_code = job_run(cfg, dir, summary, out.failure);
                break;
            case JobKind::convergence_study:
                out.exit_code = job_study(cfg, dir, summary, out.failure);
                break;
            case JobKind::compare_reference:
                out.exit_code = job_compare(cfg, dir, summary, out.failure);
                break;
            case JobKind::distance:
                out.exit_code = job_distance(cfg, dir, summary, out.failure);
                break;
            case JobKind::check_admissibility:
                out.exit_code = job_admissibility(cfg, dir, summary, out.failure);
                break;
        }
    } catch (const std::exception& e) {
        out.exit_code = 1;
        out.failure   = e.what();
    }
    summary["failure"]   = out.failure;
    summary["exit_code"] = out.exit_code;
    write_json(dir / "summary.json", summary);
    return out;
}

} // namespace mmflow
