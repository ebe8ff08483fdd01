#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qfc/fuzzy.hpp"
#include "qfc/pid.hpp"
#include "qfc/sco.hpp"

namespace qfc::qfi {

enum class Channel { P, D, I };
enum class CorrelationType { Spatial, SpatioTemporal, Temporal };

std::string to_string(CorrelationType t);
CorrelationType correlation_from_string(const std::string& s);

// Which six gains feed one output channel, and with what output scaling.
struct CorrelationSpec {
    CorrelationType type = CorrelationType::Spatial;
    int lag = 1;  // control iterations, >= 1
    double scaling_kp = 1.0;
    double scaling_kd = 1.0;
    double scaling_ki = 1.0;

    double scaling(Channel c) const {
        return c == Channel::P ? scaling_kp : (c == Channel::D ? scaling_kd : scaling_ki);
    }
    void validate() const;
};

// Per-link ring buffer of fuzzy gain proposals, indexed by control iteration.
class GainHistory {
public:
    explicit GainHistory(int capacity = 64);

    void push(const pid::GainTriple& g);
    bool empty() const { return size_ == 0; }
    int size() const { return size_; }

    // Value `lag` iterations back; clamps to the oldest retained entry
    // (zero-order hold) and reports whether clamping happened.
    pid::GainTriple lagged(int lag, bool* held = nullptr) const;

private:
    std::vector<pid::GainTriple> buf_;
    int head_ = 0;  // next write position
    int size_ = 0;
};

// One element of the 6-gain correlation input set. The source channel decides
// which bounds normalize it.
struct CorrelationInput {
    double value = 0.0;
    Channel source = Channel::P;
    int link = 0;  // 0-based
    bool lagged = false;
};

// 64 nonnegative real amplitudes over |a1 a2 a3 a4 a5 a6>. Basis index is
// MSB-first: a1 is bit 5 of the index, a6 is bit 0, so |111000> = 56.
struct QuantumStateVector {
    std::array<double, 64> amp{};
    std::uint64_t survivor_mask = ~0ULL;  // bit b set = basis state b allowed
    bool normalized = false;
};

// p = clamp((K - lo)/(hi - lo), 0, 1); *clamped reports out-of-bounds input.
double normalize_gain(double k, const fuzzy::Bounds& b, bool* clamped = nullptr);

// The printed 6-gain input set for (type, channel): two blocks of three for
// spatial/temporal, interleaved current/lagged pairs for spatio-temporal.
std::array<CorrelationInput, 6> build_correlation_inputs(
    const CorrelationSpec& spec, const std::array<GainHistory, 3>& histories,
    Channel channel, bool* held = nullptr);

// amplitude(b) = prod_j sqrt(p_j if b_j = 1 else 1 - p_j).
QuantumStateVector build_superposition(const std::array<double, 6>& p);

// Qubit pairing tied by the entanglement filter, 0-based positions in the
// printed input order: (0,3)(1,4)(2,5) for the block layouts, (0,1)(2,3)(4,5)
// for the interleaved spatio-temporal layout.
std::array<std::array<int, 2>, 3> entanglement_pairs(CorrelationType type);

// Keeps basis states whose tied qubit pairs agree and renormalizes. If every
// survivor has zero amplitude the unfiltered state is kept and *fallback set.
QuantumStateVector apply_entanglement(const QuantumStateVector& s, const CorrelationSpec& spec,
                                      bool* fallback = nullptr);

// argmax of amplitude^2 over surviving states, lowest basis index on ties.
int measure_max(const QuantumStateVector& s);

// Mean of p_j over the measured 1-bits; |000000> falls back to the mean of
// all six (reported via *fallback).
double decode_state(int basis, const std::array<double, 6>& p, bool* fallback = nullptr);

// K = clamp(lo + scaling * p_new * (hi - lo), lo, hi).
double denormalize_gain(double p_new, const fuzzy::Bounds& b, double scaling);

// Everything the pipeline produced for one output channel of one iteration.
struct ChannelTrace {
    Channel channel = Channel::P;
    std::array<CorrelationInput, 6> inputs{};
    std::array<double, 6> p{};
    std::uint64_t survivor_mask = 0;
    int measured_basis = 0;
    double decoded = 0.0;                 // the fused normalized gain
    std::array<double, 3> gain{};         // decoded through each link's range
    bool input_clamped = false;           // some input lay outside its range
    bool history_held = false;
    bool entanglement_fallback = false;
    bool decode_fallback = false;
};

struct QfiResult {
    // one fused normalized value per channel, mapped through each link's own
    // gain range (coordination control over heterogeneous links)
    std::array<pid::GainTriple, 3> per_link{};
    std::array<ChannelTrace, 3> trace;
};

// Full fusion step: per output channel, correlation inputs -> normalize (each
// gain by its source link's channel range) -> superposition -> entanglement
// filter -> measurement -> decode -> denormalize with the channel's scaling
// factor through every link's range.
QfiResult qfi_step(const CorrelationSpec& spec, const std::array<GainHistory, 3>& histories,
                   const std::array<fuzzy::ChannelBounds, 3>& bounds);

// Identical gain ranges on every link.
QfiResult qfi_step(const CorrelationSpec& spec, const std::array<GainHistory, 3>& histories,
                   const fuzzy::ChannelBounds& bounds);

struct QgaEntry {
    CorrelationType type = CorrelationType::Spatial;
    CorrelationSpec best_spec;
    double best_cost = 0.0;
    bool unstable = false;
};

struct QgaResult {
    CorrelationSpec best;
    std::vector<QgaEntry> table;  // one entry per candidate type
};

// Quantum-genetic correlation selection: exhaustive over the candidate types
// crossed with a GA over the per-channel scaling factors in
// [scaling_lo, scaling_hi]. `cost` judges a fully specified CorrelationSpec
// (lower = better; harness::suite_cost aggregates control quality over a
// scenario suite). A 5-point-per-channel scaling grid seeds each GA, so the
// selection dominates a grid search of that resolution. Throws NumericError
// with the table attached when every candidate is unstable
// (cost >= kUnstableCost, the aborted-run penalty of thermo::scalar_cost).
inline constexpr double kUnstableCost = 100.0;

QgaResult qga_select_correlation(const std::vector<CorrelationType>& candidates,
                                 const std::function<double(const CorrelationSpec&)>& cost,
                                 const sco::GaConfig& ga, double scaling_lo = 0.5,
                                 double scaling_hi = 2.0, int lag = 1);

}  // namespace qfc::qfi

