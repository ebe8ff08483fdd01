#pragma once

#include <array>
#include <utility>
#include <vector>

namespace qfc::thermo {

struct ProbabilityDistribution {
    std::vector<double> w;
    bool normalized = false;
};

// Normalizes in place; throws on empty or non-positive total mass.
ProbabilityDistribution normalize(std::vector<double> weights);

// KL divergence sum P_i ln(P_i/Q_i) in nats, 0*ln(0/q) = 0. Throws on a
// support mismatch or an absolute-continuity violation.
double kl_divergence(const ProbabilityDistribution& p, const ProbabilityDistribution& q);

// Renyi divergence of order alpha (> 0, != 1).
double renyi_divergence(const ProbabilityDistribution& p, const ProbabilityDistribution& q,
                        double alpha);

// Dissipated work bound: kT * KL(P_F || P_B).
double dissipation_work(const ProbabilityDistribution& pf, const ProbabilityDistribution& pb,
                        double kT);

// Histograms of forward increments du and time-reversed increments -du over
// symmetric bin edges, Laplace-smoothed so KL is always defined.
std::pair<ProbabilityDistribution, ProbabilityDistribution>
trajectory_step_distributions(const std::vector<double>& u, int bins);

struct QualityMetrics {
    std::array<double, 3> final_error_deg{};  // per link, vs the raw reference
    double itae = 0.0;                        // sum over links of |e|*t*dt, deg*s^2
    double overshoot_pct = 0.0;               // worst link
    double settling_time_s = 0.0;             // worst link, 2% band
    double effort = 0.0;                      // sum over links of u^2*dt
    double smoothness = 0.0;                  // total variation of u, summed
    double kl_proxy = 0.0;                    // dissipation proxy, summed over links
    bool unstable = false;
    bool aborted = false;
    double aggregate = 0.0;  // filled by aggregate_scores across compared systems
};

struct MetricsConfig {
    double instability_window_s = 0.5;
    // oscillatory excess (total variation minus net change) of the error per
    // window; sized to catch sustained chatter, not single disturbance humps
    double instability_tv_deg = 220.0;
    double settle_band = 0.02;
    int proxy_bins = 21;
    bool allow_partial = false;  // accept a truncated (aborted) trajectory
};

// Per-link time series of one completed run, at the control rate.
struct RunSeries {
    std::vector<double> t;
    std::array<std::vector<double>, 3> ref_deg;
    std::array<std::vector<double>, 3> pos_deg;
    std::array<std::vector<double>, 3> u;
    bool complete = true;
};

QualityMetrics control_quality(const RunSeries& series, const MetricsConfig& cfg = {});

// Full-control-behavior weights (positioning error, ITAE, overshoot, effort,
// smoothness), applied to min-max normalized metrics across the compared
// systems; higher aggregate = better.
inline constexpr double kAggregateWeights[5] = {0.35, 0.2, 0.15, 0.15, 0.15};

// Fills .aggregate for each row, normalizing each metric across the group.
void aggregate_scores(std::vector<QualityMetrics*>& rows);

// Absolute scalar cost for GA/QGA fitness (lower = better): the same weights
// over fixed reference scales instead of the group-relative normalization,
// plus penalties for instability and aborted runs.
double scalar_cost(const QualityMetrics& m);

}  // namespace qfc::thermo
