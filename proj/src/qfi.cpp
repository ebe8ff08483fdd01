#include "qfc/qfi.hpp"

#include <algorithm>
#include <cmath>

#include "qfc/errors.hpp"

namespace qfc::qfi {

std::string to_string(CorrelationType t) {
    switch (t) {
        case CorrelationType::Spatial:
            return "spatial";
        case CorrelationType::SpatioTemporal:
            return "spatio-temporal";
        default:
            return "temporal";
    }
}

CorrelationType correlation_from_string(const std::string& s) {
    if (s == "spatial") return CorrelationType::Spatial;
    if (s == "spatio-temporal") return CorrelationType::SpatioTemporal;
    if (s == "temporal") return CorrelationType::Temporal;
    throw ConfigError("unknown correlation type: " + s);
}

void CorrelationSpec::validate() const {
    if (lag < 1) throw ConfigError("correlation spec: lag must be >= 1");
    if (!(scaling_kp > 0.0) || !(scaling_kd > 0.0) || !(scaling_ki > 0.0))
        throw ConfigError("correlation spec: scaling factors must be positive");
}

GainHistory::GainHistory(int capacity) : buf_(static_cast<size_t>(std::max(2, capacity))) {}

void GainHistory::push(const pid::GainTriple& g) {
    buf_[static_cast<size_t>(head_)] = g;
    head_ = (head_ + 1) % static_cast<int>(buf_.size());
    size_ = std::min(size_ + 1, static_cast<int>(buf_.size()));
}

pid::GainTriple GainHistory::lagged(int lag, bool* held) const {
    if (size_ == 0) throw ConfigError("gain history: empty");
    int back = lag;
    if (back > size_ - 1) {
        back = size_ - 1;  // zero-order hold at the earliest entry
        if (held) *held = true;
    }
    const int cap = static_cast<int>(buf_.size());
    const int idx = ((head_ - 1 - back) % cap + cap) % cap;
    return buf_[static_cast<size_t>(idx)];
}

double normalize_gain(double k, const fuzzy::Bounds& b, bool* clamped) {
    if (!(b.lo < b.hi)) throw ConfigError("normalize_gain: degenerate bounds");
    const double p = (k - b.lo) / (b.hi - b.lo);
    if ((p < 0.0 || p > 1.0) && clamped) *clamped = true;
    return std::clamp(p, 0.0, 1.0);
}

namespace {

double channel_value(const pid::GainTriple& g, Channel c) {
    return c == Channel::P ? g.kp : (c == Channel::D ? g.kd : g.ki);
}

// Output channel X draws on channels (X, next(X)): P->(P,D), D->(D,I), I->(I,P).
Channel partner(Channel c) {
    return c == Channel::P ? Channel::D : (c == Channel::D ? Channel::I : Channel::P);
}

}  // namespace

std::array<CorrelationInput, 6> build_correlation_inputs(
    const CorrelationSpec& spec, const std::array<GainHistory, 3>& histories,
    Channel channel, bool* held) {
    spec.validate();
    std::array<CorrelationInput, 6> out{};
    bool any_held = false;

    const auto current = [&](int link, Channel c) {
        return CorrelationInput{channel_value(histories[static_cast<size_t>(link)].lagged(0), c),
                                c, link, false};
    };
    const auto lagged = [&](int link, Channel c) {
        bool h = false;
        const double v =
            channel_value(histories[static_cast<size_t>(link)].lagged(spec.lag, &h), c);
        any_held = any_held || h;
        return CorrelationInput{v, c, link, true};
    };

    switch (spec.type) {
        case CorrelationType::Spatial: {
            const Channel second = partner(channel);
            for (int l = 0; l < 3; ++l) out[static_cast<size_t>(l)] = current(l, channel);
            for (int l = 0; l < 3; ++l) out[static_cast<size_t>(3 + l)] = current(l, second);
            break;
        }
        case CorrelationType::SpatioTemporal: {
            const Channel second = partner(channel);
            for (int l = 0; l < 3; ++l) {
                out[static_cast<size_t>(2 * l)] = current(l, channel);
                out[static_cast<size_t>(2 * l + 1)] = lagged(l, second);
            }
            break;
        }
        case CorrelationType::Temporal: {
            for (int l = 0; l < 3; ++l) out[static_cast<size_t>(l)] = current(l, channel);
            for (int l = 0; l < 3; ++l) out[static_cast<size_t>(3 + l)] = lagged(l, channel);
            break;
        }
    }
    if (held) *held = any_held;
    return out;
}

QuantumStateVector build_superposition(const std::array<double, 6>& p) {
    for (double pj : p)
        if (pj < 0.0 || pj > 1.0 || !std::isfinite(pj))
            throw ConfigError("build_superposition: probabilities must lie in [0,1]");
    QuantumStateVector s;
    for (int b = 0; b < 64; ++b) {
        double a = 1.0;
        for (int j = 0; j < 6; ++j) {
            const bool one = (b >> (5 - j)) & 1;  // a1 is the MSB
            a *= std::sqrt(one ? p[static_cast<size_t>(j)] : 1.0 - p[static_cast<size_t>(j)]);
        }
        s.amp[static_cast<size_t>(b)] = a;
    }
    s.survivor_mask = ~0ULL;
    s.normalized = true;
    return s;
}

std::array<std::array<int, 2>, 3> entanglement_pairs(CorrelationType type) {
    if (type == CorrelationType::SpatioTemporal)
        return {{{0, 1}, {2, 3}, {4, 5}}};
    return {{{0, 3}, {1, 4}, {2, 5}}};
}

QuantumStateVector apply_entanglement(const QuantumStateVector& s, const CorrelationSpec& spec,
                                      bool* fallback) {
    const auto pairs = entanglement_pairs(spec.type);
    QuantumStateVector out = s;
    out.survivor_mask = 0;
    double norm2 = 0.0;
    for (int b = 0; b < 64; ++b) {
        bool agree = true;
        for (const auto& pr : pairs) {
            const int bi = (b >> (5 - pr[0])) & 1;
            const int bk = (b >> (5 - pr[1])) & 1;
            if (bi != bk) {
                agree = false;
                break;
            }
        }
        if (agree) {
            out.survivor_mask |= (1ULL << b);
            norm2 += s.amp[static_cast<size_t>(b)] * s.amp[static_cast<size_t>(b)];
        }
    }
    if (norm2 <= 0.0) {
        // every consistent state carries zero amplitude: keep the raw state
        if (fallback) *fallback = true;
        return s;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int b = 0; b < 64; ++b) {
        if (out.survivor_mask & (1ULL << b))
            out.amp[static_cast<size_t>(b)] *= inv;
        else
            out.amp[static_cast<size_t>(b)] = 0.0;
    }
    out.normalized = true;
    return out;
}

int measure_max(const QuantumStateVector& s) {
    int best = -1;
    double best_p = -1.0;
    for (int b = 0; b < 64; ++b) {
        if (!(s.survivor_mask & (1ULL << b))) continue;
        const double pb = s.amp[static_cast<size_t>(b)] * s.amp[static_cast<size_t>(b)];
        if (pb > best_p) {
            best_p = pb;
            best = b;
        }
    }
    if (best < 0 || best_p <= 0.0) throw NumericError("measure_max: no positive amplitude");
    return best;
}

double decode_state(int basis, const std::array<double, 6>& p, bool* fallback) {
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < 6; ++j) {
        if ((basis >> (5 - j)) & 1) {
            sum += p[static_cast<size_t>(j)];
            ++count;
        }
    }
    if (count == 0) {
        if (fallback) *fallback = true;
        for (double pj : p) sum += pj;
        return sum / 6.0;
    }
    return sum / count;
}

double denormalize_gain(double p_new, const fuzzy::Bounds& b, double scaling) {
    if (!(scaling > 0.0)) throw ConfigError("denormalize_gain: scaling must be positive");
    return std::clamp(b.lo + scaling * p_new * (b.hi - b.lo), b.lo, b.hi);
}

QgaResult qga_select_correlation(const std::vector<CorrelationType>& candidates,
                                 const std::function<double(const CorrelationSpec&)>& cost,
                                 const sco::GaConfig& ga, double scaling_lo,
                                 double scaling_hi, int lag) {
    if (candidates.empty()) throw ConfigError("qga: need at least one candidate type");
    if (!(scaling_lo > 0.0) || !(scaling_lo < scaling_hi))
        throw ConfigError("qga: bad scaling search bounds");

    // 5-point-per-channel grid seeds the scaling search of every type
    std::vector<std::vector<double>> seeds;
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            for (int c = 0; c < 5; ++c)
                seeds.push_back({scaling_lo + (scaling_hi - scaling_lo) * a / 4.0,
                                 scaling_lo + (scaling_hi - scaling_lo) * b / 4.0,
                                 scaling_lo + (scaling_hi - scaling_lo) * c / 4.0});

    QgaResult result;
    bool any_stable = false;
    for (size_t ti = 0; ti < candidates.size(); ++ti) {
        const CorrelationType type = candidates[ti];
        const auto fitness = [&](const std::vector<double>& x) {
            CorrelationSpec spec;
            spec.type = type;
            spec.lag = lag;
            spec.scaling_kp = x[0];
            spec.scaling_kd = x[1];
            spec.scaling_ki = x[2];
            return -cost(spec);
        };
        sco::GaConfig cfg = ga;
        cfg.seed = ga.seed + ti;  // independent stream per candidate type
        const std::vector<std::pair<double, double>> bounds(
            3, {scaling_lo, scaling_hi});
        const auto res = sco::ga_run(fitness, bounds, cfg, seeds);

        QgaEntry entry;
        entry.type = type;
        entry.best_spec.type = type;
        entry.best_spec.lag = lag;
        entry.best_spec.scaling_kp = res.best[0];
        entry.best_spec.scaling_kd = res.best[1];
        entry.best_spec.scaling_ki = res.best[2];
        entry.best_cost = -res.best_fitness;
        entry.unstable = !(entry.best_cost < kUnstableCost);
        any_stable = any_stable || !entry.unstable;
        result.table.push_back(entry);
    }

    size_t best = 0;
    for (size_t i = 1; i < result.table.size(); ++i)
        if (result.table[i].best_cost < result.table[best].best_cost) best = i;
    if (!any_stable) {
        std::string msg = "qga: all candidates unstable;";
        for (const auto& e : result.table)
            msg += " " + to_string(e.type) + "=" + std::to_string(e.best_cost);
        throw NumericError(msg);
    }
    result.best = result.table[best].best_spec;
    return result;
}

QfiResult qfi_step(const CorrelationSpec& spec, const std::array<GainHistory, 3>& histories,
                   const std::array<fuzzy::ChannelBounds, 3>& bounds) {
    spec.validate();
    for (const auto& h : histories)
        if (h.empty()) throw ConfigError("qfi_step: gain histories not populated");

    const auto bounds_of = [&](int link, Channel c) -> const fuzzy::Bounds& {
        const auto& b = bounds[static_cast<size_t>(link)];
        return c == Channel::P ? b.kp : (c == Channel::D ? b.kd : b.ki);
    };

    QfiResult res;
    const Channel channels[3] = {Channel::P, Channel::D, Channel::I};
    for (int ci = 0; ci < 3; ++ci) {
        const Channel ch = channels[ci];
        ChannelTrace& tr = res.trace[static_cast<size_t>(ci)];
        tr.channel = ch;
        tr.inputs = build_correlation_inputs(spec, histories, ch, &tr.history_held);
        for (int j = 0; j < 6; ++j) {
            const auto& in = tr.inputs[static_cast<size_t>(j)];
            tr.p[static_cast<size_t>(j)] =
                normalize_gain(in.value, bounds_of(in.link, in.source), &tr.input_clamped);
        }

        QuantumStateVector state = build_superposition(tr.p);
        state = apply_entanglement(state, spec, &tr.entanglement_fallback);
        tr.survivor_mask = state.survivor_mask;
        tr.measured_basis = measure_max(state);
        tr.decoded = decode_state(tr.measured_basis, tr.p, &tr.decode_fallback);
        for (int l = 0; l < 3; ++l) {
            const double g = denormalize_gain(tr.decoded, bounds_of(l, ch), spec.scaling(ch));
            tr.gain[static_cast<size_t>(l)] = g;
            auto& triple = res.per_link[static_cast<size_t>(l)];
            if (ch == Channel::P)
                triple.kp = g;
            else if (ch == Channel::D)
                triple.kd = g;
            else
                triple.ki = g;
        }
    }
    return res;
}

QfiResult qfi_step(const CorrelationSpec& spec, const std::array<GainHistory, 3>& histories,
                   const fuzzy::ChannelBounds& bounds) {
    return qfi_step(spec, histories, std::array<fuzzy::ChannelBounds, 3>{bounds, bounds, bounds});
}

}  // namespace qfc::qfi
