#include "qfc/fuzzy.hpp"

#include <cmath>

#include <json.hpp>

#include "qfc/errors.hpp"

namespace qfc::fuzzy {

using nlohmann::json;

double membership_degree(const MembershipFunction& mf, double x) {
    if (mf.shape == MfShape::Gaussian) {
        const double z = (x - mf.a) / mf.b;
        return std::exp(-0.5 * z * z);
    }
    // triangular hat, zero outside [a, c]
    if (x <= mf.a || x >= mf.c) return (x == mf.b) ? 1.0 : 0.0;
    if (x <= mf.b) return (mf.b == mf.a) ? 1.0 : (x - mf.a) / (mf.b - mf.a);
    return (mf.c == mf.b) ? 1.0 : (mf.c - x) / (mf.c - mf.b);
}

void KnowledgeBase::validate() const {
    if (inputs.empty()) throw ConfigError("kb: inputs required");
    if (rules.empty()) throw ConfigError("kb: at least one rule required");
    for (size_t v = 0; v < inputs.size(); ++v) {
        const auto& in = inputs[v];
        if (!(in.universe_lo < in.universe_hi))
            throw ConfigError("kb: inputs[" + std::to_string(v) + "].universe degenerate");
        if (in.mfs.empty())
            throw ConfigError("kb: inputs[" + std::to_string(v) + "].mfs empty");
        for (size_t m = 0; m < in.mfs.size(); ++m) {
            const auto& mf = in.mfs[m];
            if (mf.shape == MfShape::Gaussian && !(mf.b > 0.0))
                throw ConfigError("kb: inputs[" + std::to_string(v) + "].mfs[" +
                                  std::to_string(m) + "]: width must be positive");
            if (mf.shape == MfShape::Triangular && !(mf.a <= mf.b && mf.b <= mf.c))
                throw ConfigError("kb: inputs[" + std::to_string(v) + "].mfs[" +
                                  std::to_string(m) + "]: need left <= peak <= right");
        }
    }
    const auto check_bounds = [](const Bounds& b, const char* name) {
        if (!(b.lo < b.hi))
            throw ConfigError(std::string("kb: bounds.") + name + " degenerate");
    };
    check_bounds(bounds.kp, "kp");
    check_bounds(bounds.kd, "kd");
    check_bounds(bounds.ki, "ki");
    for (size_t r = 0; r < rules.size(); ++r) {
        const auto& rule = rules[r];
        if (rule.antecedent.size() != inputs.size())
            throw ConfigError("kb: rules[" + std::to_string(r) + "].antecedent arity mismatch");
        for (size_t v = 0; v < rule.antecedent.size(); ++v) {
            const int idx = rule.antecedent[v];
            if (idx < 0 || static_cast<size_t>(idx) >= inputs[v].mfs.size())
                throw ConfigError("kb: rules[" + std::to_string(r) + "].antecedent[" +
                                  std::to_string(v) + "]: membership index out of range");
        }
        const auto& c = rule.consequent;
        if (c.kp < bounds.kp.lo || c.kp > bounds.kp.hi || c.kd < bounds.kd.lo ||
            c.kd > bounds.kd.hi || c.ki < bounds.ki.lo || c.ki > bounds.ki.hi)
            throw ConfigError("kb: rules[" + std::to_string(r) +
                              "].consequent outside the gain bounds");
    }
}

namespace {
double clamp_to(const Bounds& b, double v) { return std::clamp(v, b.lo, b.hi); }
}  // namespace

InferenceResult infer_gains(const KnowledgeBase& kb, const std::vector<double>& inputs) {
    if (inputs.size() != kb.inputs.size())
        throw ConfigError("infer_gains: input arity mismatch");
    for (double x : inputs)
        if (!std::isfinite(x)) throw NumericError("infer_gains: non-finite input");

    double wsum = 0.0, kp = 0.0, kd = 0.0, ki = 0.0;
    for (const auto& rule : kb.rules) {
        double w = 1.0;
        for (size_t v = 0; v < inputs.size(); ++v)
            w *= membership_degree(kb.inputs[v].mfs[static_cast<size_t>(rule.antecedent[v])],
                                   inputs[v]);
        wsum += w;
        kp += w * rule.consequent.kp;
        kd += w * rule.consequent.kd;
        ki += w * rule.consequent.ki;
    }

    InferenceResult res;
    if (wsum <= 0.0) {
        res.no_rule_fired = true;
        res.gains.kp = 0.5 * (kb.bounds.kp.lo + kb.bounds.kp.hi);
        res.gains.kd = 0.5 * (kb.bounds.kd.lo + kb.bounds.kd.hi);
        res.gains.ki = 0.5 * (kb.bounds.ki.lo + kb.bounds.ki.hi);
        return res;
    }
    res.gains.kp = clamp_to(kb.bounds.kp, kp / wsum);
    res.gains.kd = clamp_to(kb.bounds.kd, kd / wsum);
    res.gains.ki = clamp_to(kb.bounds.ki, ki / wsum);
    return res;
}

namespace {

json mf_to_json(const MembershipFunction& mf) {
    json j;
    if (mf.shape == MfShape::Gaussian) {
        j["shape"] = "gaussian";
        j["center"] = mf.a;
        j["width"] = mf.b;
    } else {
        j["shape"] = "triangular";
        j["left"] = mf.a;
        j["peak"] = mf.b;
        j["right"] = mf.c;
    }
    return j;
}

MembershipFunction mf_from_json(const json& j, const std::string& where) {
    if (!j.contains("shape")) throw ConfigError("kb: " + where + ".shape required");
    const std::string shape = j.at("shape").get<std::string>();
    MembershipFunction mf;
    if (shape == "gaussian") {
        if (!j.contains("center") || !j.contains("width"))
            throw ConfigError("kb: " + where + ": gaussian needs center and width");
        mf = MembershipFunction::gaussian(j.at("center").get<double>(),
                                          j.at("width").get<double>());
    } else if (shape == "triangular") {
        if (!j.contains("left") || !j.contains("peak") || !j.contains("right"))
            throw ConfigError("kb: " + where + ": triangular needs left, peak, right");
        mf = MembershipFunction::triangular(j.at("left").get<double>(),
                                            j.at("peak").get<double>(),
                                            j.at("right").get<double>());
    } else {
        throw ConfigError("kb: " + where + ".shape unknown: " + shape);
    }
    return mf;
}

json bounds_to_json(const Bounds& b) { return json::array({b.lo, b.hi}); }

Bounds bounds_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("kb: " + where + " must be [lo, hi]");
    return Bounds{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string save_kb(const KnowledgeBase& kb) {
    json j;
    j["inputs"] = json::array();
    for (const auto& in : kb.inputs) {
        json ji;
        ji["name"] = in.name;
        ji["universe"] = json::array({in.universe_lo, in.universe_hi});
        ji["mfs"] = json::array();
        for (const auto& mf : in.mfs) ji["mfs"].push_back(mf_to_json(mf));
        j["inputs"].push_back(ji);
    }
    j["rules"] = json::array();
    for (const auto& r : kb.rules) {
        json jr;
        jr["antecedent"] = r.antecedent;
        jr["consequent"] = {{"kp", r.consequent.kp}, {"kd", r.consequent.kd}, {"ki", r.consequent.ki}};
        j["rules"].push_back(jr);
    }
    j["bounds"] = {{"kp", bounds_to_json(kb.bounds.kp)},
                   {"kd", bounds_to_json(kb.bounds.kd)},
                   {"ki", bounds_to_json(kb.bounds.ki)}};
    j["provenance"] = kb.provenance;
    return j.dump(2) + "\n";
}

KnowledgeBase load_kb(const std::string& document) {
    json j;
    try {
        j = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("kb: invalid JSON: ") + e.what());
    }

    KnowledgeBase kb;
    if (!j.contains("inputs")) throw ConfigError("kb: inputs required");
    if (!j.contains("rules")) throw ConfigError("kb: rules required");
    if (!j.contains("bounds")) throw ConfigError("kb: bounds required");

    for (size_t v = 0; v < j["inputs"].size(); ++v) {
        const auto& ji = j["inputs"][v];
        InputVariable in;
        if (!ji.contains("name") || !ji.contains("universe") || !ji.contains("mfs"))
            throw ConfigError("kb: inputs[" + std::to_string(v) +
                              "] needs name, universe, mfs");
        in.name = ji.at("name").get<std::string>();
        const Bounds u = bounds_from_json(ji.at("universe"),
                                          "inputs[" + std::to_string(v) + "].universe");
        in.universe_lo = u.lo;
        in.universe_hi = u.hi;
        for (size_t m = 0; m < ji["mfs"].size(); ++m)
            in.mfs.push_back(mf_from_json(
                ji["mfs"][m],
                "inputs[" + std::to_string(v) + "].mfs[" + std::to_string(m) + "]"));
        kb.inputs.push_back(std::move(in));
    }
    for (size_t r = 0; r < j["rules"].size(); ++r) {
        const auto& jr = j["rules"][r];
        Rule rule;
        if (!jr.contains("antecedent") || !jr.contains("consequent"))
            throw ConfigError("kb: rules[" + std::to_string(r) +
                              "] needs antecedent and consequent");
        rule.antecedent = jr.at("antecedent").get<std::vector<int>>();
        const auto& jc = jr.at("consequent");
        if (!jc.contains("kp") || !jc.contains("kd") || !jc.contains("ki"))
            throw ConfigError("kb: rules[" + std::to_string(r) +
                              "].consequent needs kp, kd, ki");
        rule.consequent.kp = jc.at("kp").get<double>();
        rule.consequent.kd = jc.at("kd").get<double>();
        rule.consequent.ki = jc.at("ki").get<double>();
        kb.rules.push_back(std::move(rule));
    }
    kb.bounds.kp = bounds_from_json(j["bounds"].at("kp"), "bounds.kp");
    kb.bounds.kd = bounds_from_json(j["bounds"].at("kd"), "bounds.kd");
    kb.bounds.ki = bounds_from_json(j["bounds"].at("ki"), "bounds.ki");
    if (j.contains("provenance"))
        kb.provenance = j["provenance"].get<std::map<std::string, std::string>>();

    kb.validate();
    return kb;
}

KnowledgeBase make_template(const std::vector<InputVariable>& inputs,
                            const ChannelBounds& bounds, int mf_count) {
    if (mf_count < 2) throw ConfigError("make_template: need at least 2 MFs per input");
    KnowledgeBase kb;
    kb.bounds = bounds;
    for (auto in : inputs) {
        in.mfs.clear();
        const double span = in.universe_hi - in.universe_lo;
        const double step = span / (mf_count - 1);
        for (int m = 0; m < mf_count; ++m)
            in.mfs.push_back(MembershipFunction::gaussian(in.universe_lo + m * step,
                                                          0.5 * step));
        kb.inputs.push_back(std::move(in));
    }
    // full cross product of antecedents
    std::vector<int> idx(kb.inputs.size(), 0);
    const pid::GainTriple mid{0.5 * (bounds.kp.lo + bounds.kp.hi),
                              0.5 * (bounds.kd.lo + bounds.kd.hi),
                              0.5 * (bounds.ki.lo + bounds.ki.hi)};
    while (true) {
        kb.rules.push_back(Rule{idx, mid});
        size_t v = 0;
        for (; v < idx.size(); ++v) {
            if (++idx[v] < mf_count) break;
            idx[v] = 0;
        }
        if (v == idx.size()) break;
    }
    kb.validate();
    return kb;
}

}  // namespace qfc::fuzzy
