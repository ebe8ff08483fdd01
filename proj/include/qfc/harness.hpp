#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qfc/fuzzy.hpp"
#include "qfc/pid.hpp"
#include "qfc/plant.hpp"
#include "qfc/qfi.hpp"
#include "qfc/sco.hpp"
#include "qfc/thermo.hpp"

namespace qfc::harness {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr double kControlPeriod = 0.01;  // 100 Hz control loop
inline constexpr double kPhysicsDt = 0.001;     // 1 kHz physics

enum class Topology { SeparatedFc, SingleFc, Qfc };

std::string to_string(Topology t);
Topology topology_from_string(const std::string& s);

struct ReferenceSpec {
    std::string kind = "step";  // step | ramp
    double target_deg = 0.0;
    double start_s = 0.0;
    double ramp_s = 0.0;      // ramp rise time
    double target2_deg = 0.0; // optional second leg
    double t2_s = -1.0;       // second-leg start; < 0 disables it

    double value_at(double t) const;
};

// Declarative experiment description. JSON schema documented in the README.
struct ScenarioConfig {
    std::string name = "standard";
    double duration_s = 4.0;
    std::array<ReferenceSpec, 3> reference{};
    double rate_limit_deg = 3.0;  // commanded position change per control iteration
    std::vector<plant::DisturbanceEvent> disturbances;
    Topology topology = Topology::SeparatedFc;
    std::optional<qfi::CorrelationSpec> correlation;  // required iff topology == Qfc
    std::vector<std::string> kb_paths;                // 1 for single-fc, 3 otherwise
    std::uint64_t seed = 1;
    plant::ManipulatorParams plant_params{};
    pid::PidConfig pid_config{};
    double control_period_s = kControlPeriod;
    double physics_dt_s = kPhysicsDt;

    void validate() const;
    std::string canonical_json() const;  // sorted keys, shortest numbers
    std::string config_hash() const;     // fnv1a64 hex of canonical_json()
};

ScenarioConfig scenario_from_json(const std::string& text);

// Built-in catalog: standard, forced-displacement, rate-increase, rate-decrease.
ScenarioConfig default_scenario(const std::string& name);
std::vector<std::string> default_scenario_names();

// Per-control-iteration trajectory plus terminal metrics and provenance.
struct RunRecord {
    std::vector<double> t;
    std::array<std::vector<double>, 3> ref_raw_deg;  // requested reference
    std::array<std::vector<double>, 3> ref_cmd_deg;  // after the rate limiter
    std::array<std::vector<double>, 3> q_deg;
    std::array<std::vector<double>, 3> err_rad;  // control error, vs commanded
    std::array<std::vector<pid::GainTriple>, 3> proposed;  // fuzzy output per link
    std::array<std::vector<pid::GainTriple>, 3> applied;   // what the PIDs used
    std::array<std::vector<double>, 3> torque;
    bool complete = true;
    std::string abort_reason;
    thermo::QualityMetrics metrics;
    std::string config_hash;
    std::uint64_t seed = 0;

    size_t size() const { return t.size(); }
    thermo::RunSeries to_series() const;
    std::string to_csv() const;
    std::string to_json() const;
};

// Per-iteration QFI pipeline trace for the dynamics diagnostics stream.
struct QfiTrace {
    std::vector<std::pair<int, qfi::ChannelTrace>> rows;
    std::string to_csv() const;
};

// Runs the control loop with the given knowledge bases (3 for separated/qfc,
// 1 for single-fc). Numeric divergence yields a truncated record flagged
// aborted instead of an exception.
RunRecord run_scenario(const ScenarioConfig& config,
                       const std::vector<fuzzy::KnowledgeBase>& kbs,
                       QfiTrace* trace = nullptr);

// Convenience: loads the KBs named in config.kb_paths first.
RunRecord run_scenario(const ScenarioConfig& config);

// Trained knowledge bases used by the comparison runner.
struct KbLibrary {
    std::array<fuzzy::KnowledgeBase, 3> per_link;
    fuzzy::KnowledgeBase pooled;

    std::vector<fuzzy::KnowledgeBase> for_topology(Topology t) const;
};

KbLibrary load_kb_library(const std::string& dir);

// A named controller topology to compare: separated, single, qfc-spatial,
// qfc-temporal, qfc-spatio-temporal.
struct SystemSpec {
    std::string name;
    Topology topology = Topology::SeparatedFc;
    std::optional<qfi::CorrelationSpec> correlation;
};

SystemSpec system_from_name(const std::string& name);
std::vector<std::string> default_system_names();

struct ComparisonRow {
    std::string scenario;
    std::string system;
    thermo::QualityMetrics metrics;
    std::string best;  // semicolon-joined metric names this row wins
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;  // sorted by (scenario, system)
    std::string provenance;           // "# config_hash=... seed=..."

    const ComparisonRow& at(const std::string& scenario, const std::string& system) const;
    std::string to_csv() const;
    std::string to_json() const;
};

// Full matrix run; aggregate scores are min-max normalized per scenario
// across the compared systems. Aborted runs keep their row, flagged.
ComparisonTable run_comparison(const std::vector<ScenarioConfig>& scenarios,
                               const std::vector<SystemSpec>& systems,
                               const KbLibrary& kbs);

// Rectangular infer_gains sweep over the two input universes, row-major CSV.
std::string emit_fuzzy_surface(const fuzzy::KnowledgeBase& kb, const std::string& channel,
                               int resolution);

// Scalar QGA/GA fitness over a scenario suite: mean thermo::scalar_cost of
// the qfc topology under `spec`, with the given knowledge bases.
double suite_cost(const qfi::CorrelationSpec& spec,
                  const std::vector<ScenarioConfig>& scenarios, const KbLibrary& kbs);

// Design-mode pipeline: teaching signal + per-link and pooled KB fits.
struct TrainedArtifacts {
    sco::TeachingSignal ts;
    KbLibrary kbs;
    std::array<std::array<double, 3>, 3> link_rmse{};
    std::array<double, 3> pooled_rmse{};
};

struct TrainConfig {
    std::uint64_t seed = 1;
    sco::GaConfig ts_ga{32, 40, 0.9, 0.15, 0.1, 2, 0};  // seed filled from `seed`
    sco::GaConfig kb_ga{24, 30, 0.9, 0.2, 0.1, 2, 0};
    std::string scenario = "standard";
};

TrainedArtifacts train_kb_pipeline(const TrainConfig& cfg);

// sco view of a scenario (reference targets, bounds, loop timing).
sco::NominalScenario nominal_from_scenario(const ScenarioConfig& sc);

}  // namespace qfc::harness
