#include "qfc/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qfc/errors.hpp"

namespace qfc::thermo {

namespace {
constexpr double kSmoothing = 1e-9;

void check_pair(const ProbabilityDistribution& p, const ProbabilityDistribution& q) {
    if (p.w.empty() || q.w.empty()) throw ConfigError("divergence: empty support");
    if (p.w.size() != q.w.size()) throw ConfigError("divergence: support mismatch");
    if (!p.normalized || !q.normalized)
        throw ConfigError("divergence: distributions must be normalized");
}
}  // namespace

ProbabilityDistribution normalize(std::vector<double> weights) {
    if (weights.empty()) throw ConfigError("normalize: empty support");
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw ConfigError("normalize: bad weight");
        total += w;
    }
    if (!(total > 0.0)) throw ConfigError("normalize: zero total mass");
    for (double& w : weights) w /= total;
    return {std::move(weights), true};
}

double kl_divergence(const ProbabilityDistribution& p, const ProbabilityDistribution& q) {
    check_pair(p, q);
    double s = 0.0;
    for (size_t i = 0; i < p.w.size(); ++i) {
        if (p.w[i] == 0.0) continue;
        if (q.w[i] == 0.0) throw NumericError("kl_divergence: absolute continuity violated");
        s += p.w[i] * std::log(p.w[i] / q.w[i]);
    }
    return s;
}

double renyi_divergence(const ProbabilityDistribution& p, const ProbabilityDistribution& q,
                        double alpha) {
    check_pair(p, q);
    if (!(alpha > 0.0) || alpha == 1.0)
        throw ConfigError("renyi_divergence: alpha must be positive and != 1");
    double s = 0.0;
    for (size_t i = 0; i < p.w.size(); ++i) {
        if (p.w[i] == 0.0) continue;
        if (q.w[i] == 0.0) {
            if (alpha > 1.0)
                throw NumericError("renyi_divergence: absolute continuity violated");
            continue;
        }
        s += std::pow(p.w[i], alpha) * std::pow(q.w[i], 1.0 - alpha);
    }
    return std::log(s) / (alpha - 1.0);
}

double dissipation_work(const ProbabilityDistribution& pf, const ProbabilityDistribution& pb,
                        double kT) {
    if (!(kT > 0.0)) throw ConfigError("dissipation_work: kT must be positive");
    return kT * kl_divergence(pf, pb);
}

std::pair<ProbabilityDistribution, ProbabilityDistribution>
trajectory_step_distributions(const std::vector<double>& u, int bins) {
    if (u.size() < 2) throw ConfigError("step_distributions: need at least 2 samples");
    if (bins < 2) throw ConfigError("step_distributions: need at least 2 bins");

    std::vector<double> du(u.size() - 1);
    double amax = 0.0;
    for (size_t i = 0; i + 1 < u.size(); ++i) {
        du[i] = u[i + 1] - u[i];
        amax = std::max(amax, std::abs(du[i]));
    }

    std::vector<double> fwd(static_cast<size_t>(bins), kSmoothing);
    std::vector<double> bwd(static_cast<size_t>(bins), kSmoothing);
    const auto bin_of = [&](double x) {
        if (amax == 0.0) return bins / 2;  // constant signal: point mass at center
        const double f = (x + amax) / (2.0 * amax);  // [0, 1]
        const int b = static_cast<int>(f * bins);
        return std::clamp(b, 0, bins - 1);
    };
    for (double d : du) {
        fwd[static_cast<size_t>(bin_of(d))] += 1.0;
        bwd[static_cast<size_t>(bin_of(-d))] += 1.0;
    }
    return {normalize(std::move(fwd)), normalize(std::move(bwd))};
}

QualityMetrics control_quality(const RunSeries& series, const MetricsConfig& cfg) {
    const size_t n = series.t.size();
    if (!series.complete && !cfg.allow_partial)
        throw NumericError("control_quality: truncated trajectory");
    if (n < 2) throw ConfigError("control_quality: need at least 2 samples");
    for (int l = 0; l < 3; ++l)
        if (series.ref_deg[l].size() != n || series.pos_deg[l].size() != n ||
            series.u[l].size() != n)
            throw ConfigError("control_quality: ragged series");

    QualityMetrics m;
    m.aborted = !series.complete;
    const double dt = series.t[1] - series.t[0];

    for (int l = 0; l < 3; ++l) {
        const auto& ref = series.ref_deg[l];
        const auto& pos = series.pos_deg[l];
        const auto& u = series.u[l];

        m.final_error_deg[l] = std::abs(ref.back() - pos.back());

        // step size measured from the initial position to the final reference
        const double rf = ref.back();
        const double step = rf - pos.front();

        double settle = 0.0;
        for (size_t k = 0; k < n; ++k) {
            const double e = std::abs(ref[k] - pos[k]);
            m.itae += e * series.t[k] * dt;
            if (std::abs(step) > 1e-9) {
                const double os = (pos[k] - rf) * (step > 0 ? 1.0 : -1.0);
                m.overshoot_pct = std::max(m.overshoot_pct, 100.0 * os / std::abs(step));
                if (std::abs(pos[k] - rf) > cfg.settle_band * std::abs(step))
                    settle = series.t[k] - series.t.front();
            }
        }
        m.settling_time_s = std::max(m.settling_time_s, settle);

        for (size_t k = 0; k < n; ++k) m.effort += u[k] * u[k] * dt;
        for (size_t k = 0; k + 1 < n; ++k) m.smoothness += std::abs(u[k + 1] - u[k]);

        auto [pf, pb] = trajectory_step_distributions(u, cfg.proxy_bins);
        m.kl_proxy += kl_divergence(pf, pb);

        // local-instability detector: oscillatory excess of the error signal
        // (total variation minus the net change) per sliding window, so a
        // monotone transient never trips it
        const size_t win = std::max<size_t>(2, static_cast<size_t>(cfg.instability_window_s / dt));
        std::vector<double> err(n);
        for (size_t k = 0; k < n; ++k) err[k] = ref[k] - pos[k];
        double tv = 0.0;
        for (size_t k = 0; k + 1 < n; ++k) {
            tv += std::abs(err[k + 1] - err[k]);
            if (k >= win) tv -= std::abs(err[k - win + 1] - err[k - win]);
            const size_t lo = (k + 1 >= win) ? k + 1 - win : 0;
            const double excess = tv - std::abs(err[k + 1] - err[lo]);
            if (excess > cfg.instability_tv_deg) m.unstable = true;
        }
    }
    if (m.aborted) m.unstable = true;
    return m;
}

void aggregate_scores(std::vector<QualityMetrics*>& rows) {
    if (rows.empty()) return;
    const auto metric = [](const QualityMetrics& m, int i) {
        switch (i) {
            case 0:
                return (m.final_error_deg[0] + m.final_error_deg[1] + m.final_error_deg[2]) / 3.0;
            case 1:
                return m.itae;
            case 2:
                return m.overshoot_pct;
            case 3:
                return m.effort;
            default:
                return m.smoothness;
        }
    };
    for (auto* r : rows) r->aggregate = 1.0;
    for (int i = 0; i < 5; ++i) {
        double lo = metric(*rows[0], i), hi = lo;
        for (auto* r : rows) {
            lo = std::min(lo, metric(*r, i));
            hi = std::max(hi, metric(*r, i));
        }
        if (hi - lo <= 0.0) continue;  // identical systems contribute nothing
        for (auto* r : rows)
            r->aggregate -= kAggregateWeights[i] * (metric(*r, i) - lo) / (hi - lo);
    }
}

double scalar_cost(const QualityMetrics& m) {
    // Reference scales chosen at desk-scale; documented artifact knobs.
    constexpr double err_ref = 5.0;       // deg
    constexpr double itae_ref = 50.0;     // deg*s^2
    constexpr double os_ref = 20.0;       // percent
    constexpr double effort_ref = 2000.0; // (N*m)^2*s
    constexpr double smooth_ref = 1000.0; // N*m
    const double err =
        (m.final_error_deg[0] + m.final_error_deg[1] + m.final_error_deg[2]) / 3.0;
    double cost = 0.35 * err / err_ref + 0.2 * m.itae / itae_ref +
                  0.15 * m.overshoot_pct / os_ref + 0.15 * m.effort / effort_ref +
                  0.15 * m.smoothness / smooth_ref;
    if (m.unstable) cost += 10.0;
    if (m.aborted) cost += 100.0;
    return cost;
}

}  // namespace qfc::thermo
