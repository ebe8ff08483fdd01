#include "qfc/sco.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qfc/errors.hpp"
#include "qfc/linalg.hpp"
#include "qfc/numfmt.hpp"
#include "qfc/rng.hpp"

namespace qfc::sco {

namespace {
constexpr double kRad2Deg = 57.29577951308232;
constexpr double kDeg2Rad = 1.0 / kRad2Deg;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void GaConfig::validate() const {
    if (population < 2) throw ConfigError("ga: population must be >= 2");
    if (generations < 1) throw ConfigError("ga: generations must be >= 1");
    if (crossover_rate < 0.0 || crossover_rate > 1.0 || mutation_rate < 0.0 ||
        mutation_rate > 1.0)
        throw ConfigError("ga: rates must lie in [0,1]");
    if (elite < 1 || elite >= population)
        throw ConfigError("ga: elite count must satisfy 1 <= elite < population");
}

GaResult ga_run(const std::function<double(const std::vector<double>&)>& fitness,
                const std::vector<std::pair<double, double>>& bounds, const GaConfig& cfg,
                const std::vector<std::vector<double>>& seeds) {
    cfg.validate();
    const size_t dim = bounds.size();
    if (dim == 0) throw ConfigError("ga: dimension must be >= 1");
    for (const auto& [lo, hi] : bounds)
        if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw ConfigError("ga: bounds must be finite with lo <= hi");

    const auto clip = [&](std::vector<double>& x) {
        for (size_t d = 0; d < dim; ++d)
            x[d] = std::clamp(x[d], bounds[d].first, bounds[d].second);
    };
    const auto score = [&](const std::vector<double>& x) {
        const double f = fitness(x);
        return std::isfinite(f) ? f : -kInf;  // non-finite ranks worst
    };

    const size_t pop_n = static_cast<size_t>(cfg.population);
    std::vector<std::vector<double>> pop(pop_n);
    std::vector<double> fit(pop_n);
    for (size_t i = 0; i < pop_n; ++i) {
        if (i < seeds.size()) {
            if (seeds[i].size() != dim) throw ConfigError("ga: seed dimension mismatch");
            pop[i] = seeds[i];
            clip(pop[i]);
        } else {
            Rng rng(mix_seed(cfg.seed, 0, i));
            pop[i].resize(dim);
            for (size_t d = 0; d < dim; ++d)
                pop[i][d] = rng.uniform(bounds[d].first, bounds[d].second);
        }
        fit[i] = score(pop[i]);
    }

    const auto order = [&]() {
        std::vector<size_t> idx(pop_n);
        std::iota(idx.begin(), idx.end(), size_t{0});
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
            if (fit[a] != fit[b]) return fit[a] > fit[b];
            return a < b;
        });
        return idx;
    };

    GaResult result;
    for (int g = 1; g <= cfg.generations; ++g) {
        const auto idx = order();
        std::vector<std::vector<double>> next(pop_n);
        std::vector<double> next_fit(pop_n);
        for (int e = 0; e < cfg.elite; ++e) {
            next[static_cast<size_t>(e)] = pop[idx[static_cast<size_t>(e)]];
            next_fit[static_cast<size_t>(e)] = fit[idx[static_cast<size_t>(e)]];
        }
        // mutation anneals to 1/16 of its starting scale by the last
        // generation; coarse exploration first, fine convergence late
        const double anneal =
            std::pow(0.5, 4.0 * static_cast<double>(g) / static_cast<double>(cfg.generations));
        for (size_t i = static_cast<size_t>(cfg.elite); i < pop_n; ++i) {
            Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(g), i));
            const auto tournament = [&]() -> const std::vector<double>& {
                const size_t a = rng.index(pop_n);
                const size_t b = rng.index(pop_n);
                return fit[a] >= fit[b] ? pop[a] : pop[b];
            };
            const auto& pa = tournament();
            const auto& pb = tournament();
            std::vector<double> child(dim);
            const bool cross = rng.uniform() < cfg.crossover_rate;
            for (size_t d = 0; d < dim; ++d) {
                const double pick = rng.uniform();
                child[d] = (cross && pick < 0.5) ? pb[d] : pa[d];
            }
            for (size_t d = 0; d < dim; ++d) {
                if (rng.uniform() < cfg.mutation_rate) {
                    const double range = bounds[d].second - bounds[d].first;
                    child[d] += rng.gaussian() * cfg.mutation_scale * anneal * range;
                }
            }
            clip(child);
            next_fit[i] = score(child);
            next[i] = std::move(child);
        }
        pop = std::move(next);
        fit = std::move(next_fit);
        const auto best_it = order().front();
        result.history.push_back(fit[best_it]);
    }

    const auto best = order().front();
    result.best = pop[best];
    result.best_fitness = fit[best];
    return result;
}

std::array<fuzzy::ChannelBounds, 3> derive_gain_bounds(const plant::ManipulatorParams& params) {
    params.validate();
    const auto m0 = plant::mass_matrix({0.0, 0.0, 0.0}, params);
    std::array<fuzzy::ChannelBounds, 3> out;
    for (int l = 0; l < 3; ++l) {
        const double inertia = m0[l][l];
        const double kp_hi = std::min(1225.0 * inertia, 150.0);  // omega_n <= 35 rad/s
        const double kd_hi = 1.6 * std::sqrt(kp_hi * inertia);
        auto& b = out[static_cast<size_t>(l)];
        b.kp = {0.0, kp_hi};
        b.kd = {0.0, kd_hi};
        b.ki = {0.0, 0.6 * kp_hi};
    }
    return out;
}

namespace {

// Shared nominal-plant control loop: rate-limited commanded reference, one
// PID per link, gains piecewise-constant per segment, torque held over the
// physics substeps.
struct LoopResult {
    double cost = kInf;
    double itae = kInf;
    double effort = kInf;
    bool diverged = true;
};

LoopResult simulate_schedule(const NominalScenario& sc,
                             const std::array<std::vector<pid::GainTriple>, 3>& segments,
                             TeachingSignal* trace) {
    const int iters = static_cast<int>(std::llround(sc.duration_s / sc.control_period_s));
    const int substeps =
        std::max(1, static_cast<int>(std::llround(sc.control_period_s / sc.physics_dt_s)));
    const int nseg = static_cast<int>(segments[0].size());

    plant::PlantState state;
    std::array<pid::PidState, 3> pids{};
    std::array<double, 3> cmd_deg{};
    for (int l = 0; l < 3; ++l) cmd_deg[static_cast<size_t>(l)] = state.q[l] * kRad2Deg;

    double itae = 0.0, effort = 0.0;
    LoopResult out;
    try {
        for (int k = 0; k < iters; ++k) {
            const double t = k * sc.control_period_s;
            const int seg = std::min(nseg - 1, static_cast<int>(static_cast<double>(k) * nseg / iters));
            plant::Vec3 torque{};
            for (int l = 0; l < 3; ++l) {
                const size_t li = static_cast<size_t>(l);
                cmd_deg[li] = plant::rate_limit(sc.target_deg[li], cmd_deg[li], sc.rate_limit_deg);
                const double e = cmd_deg[li] * kDeg2Rad - state.q[l];
                const auto& g = segments[li][static_cast<size_t>(seg)];
                const auto step = pid::pid_step(e, pids[li], g, sc.control_period_s, sc.pid_config);
                pids[li] = step.state;
                torque[l] = step.u;

                itae += std::abs(sc.target_deg[li] - state.q[l] * kRad2Deg) * t *
                        sc.control_period_s;
                effort += step.u * step.u * sc.control_period_s;
                if (trace) {
                    trace->ref_deg[li].push_back(sc.target_deg[li]);
                    trace->err[li].push_back(e);
                    trace->gains[li].push_back(g);
                }
            }
            if (trace) trace->t.push_back(t);
            for (int s = 0; s < substeps; ++s)
                state = plant::integrate_step(state, torque, sc.physics_dt_s, sc.plant_params);
            for (int l = 0; l < 3; ++l)
                if (std::abs(state.q[l]) > 1.0e3) throw NumericError("runaway trajectory");
        }
    } catch (const NumericError&) {
        return out;  // diverged; caller ranks it worst
    }

    // schedule regularity in channel fractions: adjacent jumps plus variance
    // around each link's mean, so quiescent segments agree instead of
    // wandering wherever the tracking cost cannot see
    double reg = 0.0;
    for (int l = 0; l < 3; ++l) {
        const auto& lb = sc.gain_bounds[static_cast<size_t>(l)];
        const double rp = lb.kp.hi - lb.kp.lo;
        const double rd = lb.kd.hi - lb.kd.lo;
        const double ri = lb.ki.hi - lb.ki.lo;
        const auto& seg = segments[static_cast<size_t>(l)];
        for (int s = 1; s < nseg; ++s) {
            const double dp = (seg[static_cast<size_t>(s)].kp - seg[static_cast<size_t>(s - 1)].kp) / rp;
            const double dd = (seg[static_cast<size_t>(s)].kd - seg[static_cast<size_t>(s - 1)].kd) / rd;
            const double di = (seg[static_cast<size_t>(s)].ki - seg[static_cast<size_t>(s - 1)].ki) / ri;
            reg += dp * dp + dd * dd + di * di;
        }
        double mp = 0.0, md = 0.0, mi = 0.0;
        for (const auto& g : seg) {
            mp += g.kp / rp;
            md += g.kd / rd;
            mi += g.ki / ri;
        }
        mp /= nseg;
        md /= nseg;
        mi /= nseg;
        for (const auto& g : seg) {
            reg += 4.0 * (g.kp / rp - mp) * (g.kp / rp - mp);
            reg += 4.0 * (g.kd / rd - md) * (g.kd / rd - md);
            reg += 4.0 * (g.ki / ri - mi) * (g.ki / ri - mi);
        }
    }

    out.cost = itae + sc.effort_weight * effort + sc.smoothness_weight * reg;
    out.itae = itae;
    out.effort = effort;
    out.diverged = false;
    return out;
}

std::array<std::vector<pid::GainTriple>, 3> decode_schedule(const NominalScenario& sc,
                                                            const std::vector<double>& genome) {
    std::array<std::vector<pid::GainTriple>, 3> segs;
    size_t g = 0;
    for (int l = 0; l < 3; ++l) {
        segs[static_cast<size_t>(l)].resize(static_cast<size_t>(sc.segments));
        for (int s = 0; s < sc.segments; ++s) {
            pid::GainTriple gt;
            gt.kp = genome[g++];
            gt.kd = genome[g++];
            gt.ki = genome[g++];
            segs[static_cast<size_t>(l)][static_cast<size_t>(s)] = gt;
        }
    }
    return segs;
}

}  // namespace

double evaluate_schedule(const NominalScenario& scenario,
                         const std::array<std::vector<pid::GainTriple>, 3>& per_link_segments,
                         TeachingSignal* trace) {
    if (trace) *trace = TeachingSignal{};
    const auto res = simulate_schedule(scenario, per_link_segments, trace);
    if (trace) {
        trace->cost = res.cost;
        trace->itae_term = res.itae;
        trace->effort_term = res.effort;
    }
    return res.cost;
}

TeachingSignal generate_teaching_signal(const NominalScenario& scenario, const GaConfig& ga) {
    if (scenario.segments < 1) throw ConfigError("teaching signal: segments must be >= 1");
    scenario.plant_params.validate();

    std::vector<std::pair<double, double>> bounds;
    for (int l = 0; l < 3; ++l) {
        const auto& lb = scenario.gain_bounds[static_cast<size_t>(l)];
        for (int s = 0; s < scenario.segments; ++s) {
            bounds.emplace_back(lb.kp.lo, lb.kp.hi);
            bounds.emplace_back(lb.kd.lo, lb.kd.hi);
            bounds.emplace_back(lb.ki.lo, lb.ki.hi);
        }
    }

    const auto fitness = [&](const std::vector<double>& genome) {
        return -simulate_schedule(scenario, decode_schedule(scenario, genome), nullptr).cost;
    };

    // seed the search with the all-midpoint schedule plus inertia-scaled PD
    // designs; elitism keeps the signal at least as good as the best seed
    std::vector<std::vector<double>> seeds;
    std::vector<double> midpoint;
    for (int l = 0; l < 3; ++l) {
        const auto& lb = scenario.gain_bounds[static_cast<size_t>(l)];
        for (int s = 0; s < scenario.segments; ++s) {
            midpoint.push_back(0.5 * (lb.kp.lo + lb.kp.hi));
            midpoint.push_back(0.5 * (lb.kd.lo + lb.kd.hi));
            midpoint.push_back(0.5 * (lb.ki.lo + lb.ki.hi));
        }
    }
    seeds.push_back(std::move(midpoint));

    const auto m0 = plant::mass_matrix({0.0, 0.0, 0.0}, scenario.plant_params);
    for (const double omega : {6.0, 10.0}) {
        std::vector<double> seed;
        for (int l = 0; l < 3; ++l) {
            const double inertia = m0[l][l];
            const double kp = inertia * omega * omega;
            const double kd =
                std::max(0.0, 1.4 * inertia * omega - scenario.plant_params.friction[l]);
            const double ki = 0.6 * kp;
            for (int s = 0; s < scenario.segments; ++s) {
                seed.push_back(kp);
                seed.push_back(kd);
                seed.push_back(ki);
            }
        }
        seeds.push_back(std::move(seed));
    }
    const GaResult res = ga_run(fitness, bounds, ga, seeds);

    TeachingSignal ts;
    const double cost =
        evaluate_schedule(scenario, decode_schedule(scenario, res.best), &ts);
    if (!std::isfinite(cost)) throw NumericError("teaching signal search failed");
    return ts;
}

std::string TeachingSignal::to_csv() const {
    std::ostringstream os;
    os << "t,ref1_deg,ref2_deg,ref3_deg,err1_rad,err2_rad,err3_rad,"
          "kp1,kd1,ki1,kp2,kd2,ki2,kp3,kd3,ki3\n";
    for (size_t k = 0; k < t.size(); ++k) {
        os << format_double(t[k]);
        for (int l = 0; l < 3; ++l) os << ',' << format_double(ref_deg[static_cast<size_t>(l)][k]);
        for (int l = 0; l < 3; ++l) os << ',' << format_double(err[static_cast<size_t>(l)][k]);
        for (int l = 0; l < 3; ++l) {
            const auto& g = gains[static_cast<size_t>(l)][k];
            os << ',' << format_double(g.kp) << ',' << format_double(g.kd) << ','
               << format_double(g.ki);
        }
        os << '\n';
    }
    return os.str();
}

namespace {

struct Samples {
    std::vector<std::array<double, 2>> x;  // error, error rate
    std::vector<pid::GainTriple> y;
};

Samples extract_samples(const TeachingSignal& ts, int link, double dt) {
    if (ts.size() == 0) throw ConfigError("optimize_kb: empty teaching signal");
    Samples s;
    const auto add_link = [&](int l) {
        const auto& e = ts.err[static_cast<size_t>(l)];
        for (size_t k = 0; k < e.size(); ++k) {
            const double de = k == 0 ? 0.0 : (e[k] - e[k - 1]) / dt;
            s.x.push_back({e[k], de});
            s.y.push_back(ts.gains[static_cast<size_t>(l)][k]);
        }
    };
    if (link >= 0)
        add_link(link);
    else
        for (int l = 0; l < 3; ++l) add_link(l);
    return s;
}

// Box-constrained ridge least squares on the normalized firing-strength
// matrix, solved per channel by cyclic coordinate descent. The bounds live
// inside the optimization (a plain solve would cancel huge +/- coefficients
// that clamping then destroys); rules that never fire settle at zero.
void fit_consequents(fuzzy::KnowledgeBase& kb, const Samples& samples) {
    const size_t n = samples.x.size();
    const size_t r = kb.rules.size();
    std::vector<double> phi(n * r);
    for (size_t i = 0; i < n; ++i) {
        double wsum = 0.0;
        for (size_t j = 0; j < r; ++j) {
            double w = 1.0;
            for (size_t v = 0; v < kb.inputs.size(); ++v)
                w *= fuzzy::membership_degree(
                    kb.inputs[v].mfs[static_cast<size_t>(kb.rules[j].antecedent[v])],
                    samples.x[i][v]);
            phi[i * r + j] = w;
            wsum += w;
        }
        if (wsum > 0.0)
            for (size_t j = 0; j < r; ++j) phi[i * r + j] /= wsum;
    }

    constexpr double ridge = 1.0e-9;
    std::vector<double> gram(r * r, 0.0);
    for (size_t i = 0; i < n; ++i)
        for (size_t a = 0; a < r; ++a) {
            if (phi[i * r + a] == 0.0) continue;
            for (size_t b = a; b < r; ++b)
                gram[a * r + b] += phi[i * r + a] * phi[i * r + b];
        }
    for (size_t a = 0; a < r; ++a)
        for (size_t b = 0; b < a; ++b) gram[a * r + b] = gram[b * r + a];

    for (int ch = 0; ch < 3; ++ch) {
        std::vector<double> rhs(r, 0.0);
        for (size_t i = 0; i < n; ++i) {
            const auto& g = samples.y[i];
            const double target = ch == 0 ? g.kp : (ch == 1 ? g.kd : g.ki);
            for (size_t a = 0; a < r; ++a) rhs[a] += phi[i * r + a] * target;
        }
        const fuzzy::Bounds& b =
            ch == 0 ? kb.bounds.kp : (ch == 1 ? kb.bounds.kd : kb.bounds.ki);

        // exact ridge solve; accepted when it already satisfies the box
        std::vector<double> reg = gram;
        for (size_t a = 0; a < r; ++a) reg[a * r + a] += ridge;
        std::vector<double> c = solve_spd(std::move(reg), rhs, "kb consequent fit");
        const double slack = 1.0e-9 * (b.hi - b.lo);
        bool interior = true;
        for (double v : c)
            if (v < b.lo - slack || v > b.hi + slack) interior = false;

        if (interior) {
            for (double& v : c) v = std::clamp(v, b.lo, b.hi);
        } else {
            // active constraints: cyclic coordinate descent, warm-started
            for (double& v : c) v = std::clamp(v, b.lo, b.hi);
            const double tol = 1.0e-13 * (b.hi - b.lo);
            for (int sweep = 0; sweep < 2000; ++sweep) {
                double largest = 0.0;
                for (size_t j = 0; j < r; ++j) {
                    double acc = rhs[j];
                    for (size_t k = 0; k < r; ++k)
                        if (k != j) acc -= gram[j * r + k] * c[k];
                    const double next =
                        std::clamp(acc / (gram[j * r + j] + ridge), b.lo, b.hi);
                    largest = std::max(largest, std::abs(next - c[j]));
                    c[j] = next;
                }
                if (largest < tol) break;
            }
        }
        for (size_t a = 0; a < r; ++a) {
            if (ch == 0)
                kb.rules[a].consequent.kp = c[a];
            else if (ch == 1)
                kb.rules[a].consequent.kd = c[a];
            else
                kb.rules[a].consequent.ki = c[a];
        }
    }
}

std::array<double, 3> training_rmse(const fuzzy::KnowledgeBase& kb, const Samples& samples) {
    std::array<double, 3> se{};
    for (size_t i = 0; i < samples.x.size(); ++i) {
        const auto res = fuzzy::infer_gains(kb, {samples.x[i][0], samples.x[i][1]});
        const auto& y = samples.y[i];
        se[0] += (res.gains.kp - y.kp) * (res.gains.kp - y.kp);
        se[1] += (res.gains.kd - y.kd) * (res.gains.kd - y.kd);
        se[2] += (res.gains.ki - y.ki) * (res.gains.ki - y.ki);
    }
    for (auto& v : se) v = std::sqrt(v / static_cast<double>(samples.x.size()));
    return se;
}

}  // namespace

fuzzy::KnowledgeBase default_template(const TeachingSignal& ts,
                                      const fuzzy::ChannelBounds& bounds, int link,
                                      int mf_count) {
    const double dt = ts.size() > 1 ? ts.t[1] - ts.t[0] : 0.01;
    const Samples s = extract_samples(ts, link, dt);
    double emax = 0.0, dmax = 0.0;
    for (const auto& x : s.x) {
        emax = std::max(emax, std::abs(x[0]));
        dmax = std::max(dmax, std::abs(x[1]));
    }
    // symmetric universes, 2x margin: contingencies push features well past
    // anything the nominal run produced
    const double espan = std::max(2.0 * emax, 0.1);
    const double dspan = std::max(2.0 * dmax, 0.5);
    std::vector<fuzzy::InputVariable> inputs(2);
    inputs[0].name = "error";
    inputs[0].universe_lo = -espan;
    inputs[0].universe_hi = espan;
    inputs[1].name = "error_rate";
    inputs[1].universe_lo = -dspan;
    inputs[1].universe_hi = dspan;
    return fuzzy::make_template(inputs, bounds, mf_count);
}

KbFit optimize_kb(const TeachingSignal& ts, const fuzzy::KnowledgeBase& tmpl,
                  const GaConfig& ga, int link) {
    if (ts.size() == 0) throw ConfigError("optimize_kb: empty teaching signal");
    tmpl.validate();
    if (tmpl.inputs.size() != 2) throw ConfigError("optimize_kb: template must have 2 inputs");

    const double dt = ts.size() > 1 ? ts.t[1] - ts.t[0] : 0.01;
    const Samples samples = extract_samples(ts, link, dt);

    // genome: per input, per MF: center then width
    std::vector<std::pair<double, double>> gbounds;
    for (const auto& in : tmpl.inputs) {
        const double span = in.universe_hi - in.universe_lo;
        for (size_t m = 0; m < in.mfs.size(); ++m) {
            gbounds.emplace_back(in.universe_lo, in.universe_hi);
            gbounds.emplace_back(0.02 * span, 0.5 * span);
        }
    }

    const auto build = [&](const std::vector<double>& genome) {
        fuzzy::KnowledgeBase kb = tmpl;
        size_t g = 0;
        for (auto& in : kb.inputs)
            for (auto& mf : in.mfs) {
                mf = fuzzy::MembershipFunction::gaussian(genome[g], genome[g + 1]);
                g += 2;
            }
        fit_consequents(kb, samples);
        return kb;
    };

    const double rp = tmpl.bounds.kp.hi - tmpl.bounds.kp.lo;
    const double rd = tmpl.bounds.kd.hi - tmpl.bounds.kd.lo;
    const double ri = tmpl.bounds.ki.hi - tmpl.bounds.ki.lo;
    const auto fitness = [&](const std::vector<double>& genome) {
        const auto rmse = training_rmse(build(genome), samples);
        return -(rmse[0] / rp + rmse[1] / rd + rmse[2] / ri);
    };

    // template's own MF layout as a seed individual
    std::vector<double> seed0;
    for (const auto& in : tmpl.inputs)
        for (const auto& mf : in.mfs) {
            seed0.push_back(mf.a);
            seed0.push_back(mf.b);
        }

    const GaResult res = ga_run(fitness, gbounds, ga, {seed0});

    KbFit fit;
    fit.kb = build(res.best);
    fit.rmse = training_rmse(fit.kb, samples);
    return fit;
}

}  // namespace qfc::sco
