// JSON experiment configuration: strict schema (unknown keys rejected,
// errors carry JSON-pointer paths), builtin catalogs for mobilities,
// energies, potentials and initial data, and construction of the runtime
// specs from a validated config.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmflow/energy.hpp"
#include "mmflow/grid.hpp"
#include "mmflow/mobility.hpp"

namespace mmflow {

// Thrown for every schema violation; `pointer` is the JSON-pointer path of
// the offending element.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& pointer, const std::string& message)
        : std::runtime_error(pointer + ": " + message), pointer_(pointer) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

enum class JobKind { run, convergence_study, compare_reference, distance, check_admissibility };

struct MobilityConfig {
    std::string kind = "linear"; // logistic | power_eps | power | linear
    double S0 = 1.0, growth = 0.0;        // logistic
    double eps = 0.1;                     // power_eps
    TimeAffine alpha{1.0, 0.0};           // power / power_eps exponent
    double C = 1.0;                       // linear slope
    std::optional<double> delta;          // optional delta-approximation
};

struct PhiConfig {
    std::string kind = "zero"; // zero | linear | quadratic-well | cosine
    double slope = 0.0;        // linear: phi = slope * x
    double strength = 0.0;     // quadratic-well: phi = strength * (x - L/2)^2
    double amplitude = 0.0;    // cosine: phi = amplitude * cos(mode pi x / L)
    int    mode = 1;
};

struct EnergyConfig {
    std::string kind = "quadratic_e1"; // quadratic_e1 | quadratic_gradient | dirichlet
    PhiConfig   phi;
};

struct InitialConfig {
    std::string kind = "uniform"; // uniform | bump | two-bump | step
    double center = 0.5;          // bump center (fraction of L)
    double width  = 0.25;         // bump half-width (fraction of L)
};

struct SchemeConfig {
    std::vector<double> tau_list; // one entry for plain runs
    double T   = 0.1;
    int    K   = 16;
    double tol = 1e-8;
    int    max_iterations = 200000;
};

struct ExperimentConfig {
    JobKind     job = JobKind::run;
    double      L   = 1.0;
    int         N   = 64;
    MobilityConfig mobility;
    EnergyConfig   energy;
    InitialConfig  initial;
    std::optional<InitialConfig> initial_b; // second endpoint for distance jobs
    SchemeConfig   scheme;
    double reference_dt_safety = 1.0; // multiplies the documented stable dt
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Serializes back to the canonical JSON form (the summary echo); parsing the
// echo reproduces an equal config.
nlohmann::json config_echo(const ExperimentConfig& cfg);
bool config_equal(const ExperimentConfig& a, const ExperimentConfig& b);

// Spec construction from validated config blocks.
Grid1D       grid_from_config(const ExperimentConfig& cfg);
MobilitySpec mobility_from_config(const MobilityConfig& mc);
EnergySpec   energy_from_config(const EnergyConfig& ec, double L);
DensityField initial_from_config(const InitialConfig& ic, const Grid1D& g);

// Validates 0 <= u0 <= S(0) for the configured mobility (the hypothesis the
// scheme needs at start time); throws ConfigError at /initial on violation.
void validate_initial_bound(const DensityField& u0, const MobilitySpec& mspec);

std::string job_kind_name(JobKind k);

} // namespace mmflow
