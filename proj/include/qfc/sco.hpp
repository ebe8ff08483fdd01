#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qfc/fuzzy.hpp"
#include "qfc/pid.hpp"
#include "qfc/plant.hpp"

namespace qfc::sco {

struct GaConfig {
    int population = 40;
    int generations = 60;
    double crossover_rate = 0.9;
    double mutation_rate = 0.15;
    double mutation_scale = 0.1;  // relative to each dimension's range
    int elite = 2;
    std::uint64_t seed = 1;

    void validate() const;
};

struct GaResult {
    std::vector<double> best;
    double best_fitness = 0.0;
    std::vector<double> history;  // best-so-far per generation, non-decreasing
};

// Real-coded GA: tournament selection (size 2), uniform crossover, gaussian
// mutation clipped to bounds, elitism. Maximizes `fitness`; non-finite
// fitness ranks worst. Deterministic given the seed; per-individual RNG
// streams are derived independently so evaluation order never matters.
// `seeds` are optional initial individuals (clipped to bounds).
GaResult ga_run(const std::function<double(const std::vector<double>&)>& fitness,
                const std::vector<std::pair<double, double>>& bounds, const GaConfig& cfg,
                const std::vector<std::vector<double>>& seeds = {});

// Per-link gain ranges scaled to the diagonal inertia each joint sees, capped
// where gravity stiffness stops paying. The derivative caps stay inside the
// discrete-loop stability margin at the 100 Hz control rate.
std::array<fuzzy::ChannelBounds, 3> derive_gain_bounds(const plant::ManipulatorParams& params);

// Offline design-mode description of the nominal control task.
struct NominalScenario {
    std::array<double, 3> target_deg{30.0, 20.0, 15.0};
    double duration_s = 4.0;
    double rate_limit_deg = 3.0;  // commanded position change per control iteration
    plant::ManipulatorParams plant_params{};
    pid::PidConfig pid_config{};
    std::array<fuzzy::ChannelBounds, 3> gain_bounds = derive_gain_bounds(plant_params);
    double control_period_s = 0.01;
    double physics_dt_s = 0.001;
    int segments = 10;            // piecewise-constant gain segments
    double effort_weight = 0.01;  // lambda on integral(u^2) in J
    // weight on the schedule-regularity term (adjacent jumps + variance, in
    // channel fractions); keeps quiescent segments from wandering, which
    // would poison KB fitting
    double smoothness_weight = 6.0;
};

// Optimal gain-schedule trajectory found on the nominal plant.
struct TeachingSignal {
    std::vector<double> t;
    std::array<std::vector<double>, 3> ref_deg;
    std::array<std::vector<double>, 3> err;  // control error, rad
    std::array<std::vector<pid::GainTriple>, 3> gains;
    double cost = 0.0;         // J of the emitted schedule
    double itae_term = 0.0;    // integral(|e_deg| * t) summed over links
    double effort_term = 0.0;  // integral(u^2) summed over links, unweighted

    size_t size() const { return t.size(); }
    std::string to_csv() const;
};

// GA search over piecewise-constant per-link gain schedules minimizing
// J = ITAE (deg*s^2) + effort_weight * integral(u^2) + smoothness_weight *
// schedule regularity, summed over links. Throws
// NumericError("teaching signal search failed") if the best candidate still
// diverges.
TeachingSignal generate_teaching_signal(const NominalScenario& scenario, const GaConfig& ga);

// Simulates one fixed gain schedule on the nominal plant; used by the search
// and exposed for baseline comparisons. Returns J (infinite on divergence).
double evaluate_schedule(const NominalScenario& scenario,
                         const std::array<std::vector<pid::GainTriple>, 3>& per_link_segments,
                         TeachingSignal* trace = nullptr);

// Template whose universes cover the TS feature ranges (error, error rate)
// with a 2x margin; 5 gaussian MFs per input, full rule grid.
fuzzy::KnowledgeBase default_template(const TeachingSignal& ts,
                                      const fuzzy::ChannelBounds& bounds, int link,
                                      int mf_count = 5);

struct KbFit {
    fuzzy::KnowledgeBase kb;
    std::array<double, 3> rmse{};  // kp, kd, ki training RMSE
};

// Fits the template to the TS gain trajectories: the GA tunes membership
// centers/widths, consequents come from box-constrained ridge least squares
// per channel. link in 0..2 trains on that link; link = -1 pools all three
// links' samples (single-FC knowledge base).
KbFit optimize_kb(const TeachingSignal& ts, const fuzzy::KnowledgeBase& tmpl,
                  const GaConfig& ga, int link);

}  // namespace qfc::sco
