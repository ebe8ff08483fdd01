#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "qfc/pid.hpp"

namespace qfc::fuzzy {

enum class MfShape { Gaussian, Triangular };

struct MembershipFunction {
    MfShape shape = MfShape::Gaussian;
    // gaussian: a = center, b = width (> 0), c unused
    // triangular: a = left, b = peak, c = right, a <= b <= c
    double a = 0.0, b = 1.0, c = 0.0;

    static MembershipFunction gaussian(double center, double width) {
        return {MfShape::Gaussian, center, width, 0.0};
    }
    static MembershipFunction triangular(double left, double peak, double right) {
        return {MfShape::Triangular, left, peak, right};
    }
};

double membership_degree(const MembershipFunction& mf, double x);

struct InputVariable {
    std::string name;
    double universe_lo = -1.0;
    double universe_hi = 1.0;
    std::vector<MembershipFunction> mfs;
};

struct Rule {
    std::vector<int> antecedent;  // one MF index per input variable
    pid::GainTriple consequent;
};

struct Bounds {
    double lo = 0.0;
    double hi = 1.0;
};

// Shared across the three link KBs; the QFI fusion normalizes every gain by
// its channel's range, so the ranges must be survivable by every link. The
// derivative cap keeps a broadcast KD stable on the light distal link at the
// 100 Hz control rate.
struct ChannelBounds {
    Bounds kp{0.0, 150.0};
    Bounds kd{0.0, 2.5};
    Bounds ki{0.0, 80.0};
};

// Zero-order Sugeno rule base mapping (error, error rate) features to a PID
// gain triple. Immutable once loaded; inference is pure.
struct KnowledgeBase {
    std::vector<InputVariable> inputs;
    std::vector<Rule> rules;
    ChannelBounds bounds;
    std::map<std::string, std::string> provenance;

    void validate() const;  // throws ConfigError naming the offending field
};

struct InferenceResult {
    pid::GainTriple gains;
    bool no_rule_fired = false;  // midpoint fallback was used
};

// Product t-norm, weighted-average defuzzification, output clamped to bounds.
InferenceResult infer_gains(const KnowledgeBase& kb, const std::vector<double>& inputs);

// Canonical JSON document: sorted keys, shortest round-trip numbers, trailing
// newline. load(save(kb)) is structurally identical and byte-stable.
std::string save_kb(const KnowledgeBase& kb);
KnowledgeBase load_kb(const std::string& document);

// Uniform grid template: `mf_count` gaussians per input spanning each
// universe, the full rule cross product, consequents at channel midpoints.
KnowledgeBase make_template(const std::vector<InputVariable>& inputs,
                            const ChannelBounds& bounds, int mf_count);

}  // namespace qfc::fuzzy
