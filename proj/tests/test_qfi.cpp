#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qfc/errors.hpp"
#include "qfc/qfi.hpp"
#include "qfc/rng.hpp"

using namespace qfc;
using qfi::Channel;
using qfi::CorrelationSpec;
using qfi::CorrelationType;
using qfi::GainHistory;

namespace {

// Distinguishable encoding: value = 100*(link+1) + 10*channel + lag, with
// channel P=1, D=2, I=3. Lets the golden tables below assert exact picks.
double enc(int link, int channel, int lag) { return 100.0 * (link + 1) + 10.0 * channel + lag; }

std::array<GainHistory, 3> coded_histories() {
    std::array<GainHistory, 3> h{GainHistory(8), GainHistory(8), GainHistory(8)};
    for (int l = 0; l < 3; ++l) {
        h[l].push({enc(l, 1, 1), enc(l, 2, 1), enc(l, 3, 1)});  // t - dt
        h[l].push({enc(l, 1, 0), enc(l, 2, 0), enc(l, 3, 0)});  // t
    }
    return h;
}

CorrelationSpec spec_of(CorrelationType type) {
    CorrelationSpec s;
    s.type = type;
    s.lag = 1;
    return s;
}

std::array<double, 6> values_of(const std::array<qfi::CorrelationInput, 6>& in) {
    std::array<double, 6> v{};
    for (int i = 0; i < 6; ++i) v[i] = in[i].value;
    return v;
}

}  // namespace

TEST_CASE("golden channel sets: spatial") {
    const auto h = coded_histories();
    const auto spec = spec_of(CorrelationType::Spatial);
    // P <- {KP1(t),KP2(t),KP3(t),KD1(t),KD2(t),KD3(t)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::P)) ==
          std::array<double, 6>{110, 210, 310, 120, 220, 320});
    // D <- {KD1(t),KD2(t),KD3(t),KI1(t),KI2(t),KI3(t)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::D)) ==
          std::array<double, 6>{120, 220, 320, 130, 230, 330});
    // I <- {KI1(t),KI2(t),KI3(t),KP1(t),KP2(t),KP3(t)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::I)) ==
          std::array<double, 6>{130, 230, 330, 110, 210, 310});
}

TEST_CASE("golden channel sets: spatio-temporal") {
    const auto h = coded_histories();
    const auto spec = spec_of(CorrelationType::SpatioTemporal);
    // P <- {KP1(t),KD1(t-dt),KP2(t),KD2(t-dt),KP3(t),KD3(t-dt)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::P)) ==
          std::array<double, 6>{110, 121, 210, 221, 310, 321});
    // D <- {KD1(t),KI1(t-dt),KD2(t),KI2(t-dt),KD3(t),KI3(t-dt)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::D)) ==
          std::array<double, 6>{120, 131, 220, 231, 320, 331});
    // I <- {KI1(t),KP1(t-dt),KI2(t),KP2(t-dt),KI3(t),KP3(t-dt)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::I)) ==
          std::array<double, 6>{130, 111, 230, 211, 330, 311});
}

TEST_CASE("golden channel sets: temporal") {
    const auto h = coded_histories();
    const auto spec = spec_of(CorrelationType::Temporal);
    // X <- {KX1(t),KX2(t),KX3(t),KX1(t-dt),KX2(t-dt),KX3(t-dt)}
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::P)) ==
          std::array<double, 6>{110, 210, 310, 111, 211, 311});
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::D)) ==
          std::array<double, 6>{120, 220, 320, 121, 221, 321});
    CHECK(values_of(qfi::build_correlation_inputs(spec, h, Channel::I)) ==
          std::array<double, 6>{130, 230, 330, 131, 231, 331});
}

TEST_CASE("gain history ring buffer wraps and lags correctly") {
    GainHistory h(8);
    CHECK(h.empty());
    for (int k = 0; k < 100; ++k) h.push({double(k), 0.0, 0.0});
    CHECK(h.size() == 8);
    CHECK(h.lagged(0).kp == 99.0);
    CHECK(h.lagged(3).kp == 96.0);
    bool held = false;
    CHECK(h.lagged(7, &held).kp == 92.0);
    CHECK_FALSE(held);
    CHECK(h.lagged(20, &held).kp == 92.0);  // clamped to the oldest retained
    CHECK(held);
}

TEST_CASE("history shorter than the lag holds the earliest entry") {
    std::array<GainHistory, 3> h{GainHistory(8), GainHistory(8), GainHistory(8)};
    for (int l = 0; l < 3; ++l) h[l].push({enc(l, 1, 0), enc(l, 2, 0), enc(l, 3, 0)});
    bool held = false;
    const auto in = qfi::build_correlation_inputs(spec_of(CorrelationType::Temporal), h,
                                                  Channel::P, &held);
    CHECK(held);
    CHECK(in[0].value == in[3].value);  // lagged falls back to current
    CHECK(in[1].value == in[4].value);
    CHECK(in[2].value == in[5].value);
}

TEST_CASE("normalize_gain") {
    const fuzzy::Bounds b{0.0, 10.0};
    CHECK(qfi::normalize_gain(2.5, b) == 0.25);
    CHECK(qfi::normalize_gain(0.0, b) == 0.0);
    CHECK(qfi::normalize_gain(10.0, b) == 1.0);
    bool clamped = false;
    CHECK(qfi::normalize_gain(12.0, b, &clamped) == 1.0);
    CHECK(clamped);
    CHECK_THROWS_AS(qfi::normalize_gain(1.0, fuzzy::Bounds{5.0, 5.0}), ConfigError);
}

TEST_CASE("superposition amplitudes") {
    SUBCASE("certain bits concentrate on one basis state") {
        const auto s = qfi::build_superposition({1, 1, 1, 1, 1, 1});
        CHECK(s.amp[63] == 1.0);
        for (int b = 0; b < 63; ++b) CHECK(s.amp[b] == 0.0);
    }
    SUBCASE("uniform p gives the flat superposition") {
        const auto s = qfi::build_superposition({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
        for (int b = 0; b < 64; ++b) CHECK(s.amp[b] == doctest::Approx(0.125).epsilon(1e-12));
    }
    SUBCASE("normalization for random p") {
        Rng rng(41);
        for (int i = 0; i < 10000; ++i) {
            std::array<double, 6> p;
            for (auto& x : p) x = rng.uniform();
            const auto s = qfi::build_superposition(p);
            double norm = 0.0;
            for (double a : s.amp) norm += a * a;
            CHECK(std::abs(norm - 1.0) < 1e-9);
        }
    }
    SUBCASE("out-of-range p rejected") {
        CHECK_THROWS_AS(qfi::build_superposition({1.2, 0, 0, 0, 0, 0}), ConfigError);
    }
}

TEST_CASE("entanglement survivor mask matches brute-force enumeration") {
    Rng rng(43);
    for (const auto type : {CorrelationType::Spatial, CorrelationType::SpatioTemporal,
                            CorrelationType::Temporal}) {
        const auto pairs = qfi::entanglement_pairs(type);
        std::array<double, 6> p;
        for (auto& x : p) x = rng.uniform(0.05, 0.95);
        auto s = qfi::build_superposition(p);
        s = qfi::apply_entanglement(s, spec_of(type));

        // independent enumeration of the pairing predicate over all 64 states
        std::uint64_t expected = 0;
        int survivors = 0;
        for (int b = 0; b < 64; ++b) {
            bool ok = true;
            for (const auto& pr : pairs)
                if ((((b >> (5 - pr[0])) & 1)) != (((b >> (5 - pr[1])) & 1))) ok = false;
            if (ok) {
                expected |= (1ULL << b);
                ++survivors;
            }
        }
        CHECK(s.survivor_mask == expected);
        CHECK(survivors == 8);  // 3 tied pairs leave 2^3 free states

        double norm = 0.0;
        for (double a : s.amp) norm += a * a;
        CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("contradictory certain inputs trigger the entanglement fallback") {
    // p = (1,1,1,0,0,0) with pairing (1,4)(2,5)(3,6): every consistent state
    // has zero amplitude
    const auto s0 = qfi::build_superposition({1, 1, 1, 0, 0, 0});
    bool fallback = false;
    const auto s = qfi::apply_entanglement(s0, spec_of(CorrelationType::Spatial), &fallback);
    CHECK(fallback);
    CHECK(s.amp[0b111000] == 1.0);  // unfiltered state kept
}

TEST_CASE("uniform p after the filter is flat over the 8 survivors") {
    auto s = qfi::build_superposition({0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    s = qfi::apply_entanglement(s, spec_of(CorrelationType::Temporal));
    int down = 0;
    for (int b = 0; b < 64; ++b) {
        if (s.survivor_mask & (1ULL << b)) {
            CHECK(s.amp[b] == doctest::Approx(1.0 / std::sqrt(8.0)).epsilon(1e-12));
        } else {
            CHECK(s.amp[b] == 0.0);
            ++down;
        }
    }
    CHECK(down == 56);
}

TEST_CASE("measurement") {
    qfi::QuantumStateVector s;
    s.amp[0b101010] = 0.9;
    s.amp[0b000001] = 0.1;
    CHECK(qfi::measure_max(s) == 0b101010);

    SUBCASE("ties break to the lowest basis index") {
        qfi::QuantumStateVector t;
        t.amp[5] = 0.5;
        t.amp[9] = 0.5;
        CHECK(qfi::measure_max(t) == 5);
    }
    SUBCASE("argmax invariant under positive scaling") {
        Rng rng(47);
        qfi::QuantumStateVector t;
        for (auto& a : t.amp) a = rng.uniform();
        const int before = qfi::measure_max(t);
        for (auto& a : t.amp) a *= 3.0;
        CHECK(qfi::measure_max(t) == before);
    }
    SUBCASE("all-zero state is a hard error") {
        qfi::QuantumStateVector z;
        CHECK_THROWS_AS(qfi::measure_max(z), NumericError);
    }
}

TEST_CASE("decoding") {
    std::array<double, 6> p{0.4, 0.6, 0.1, 0.9, 0.2, 0.8};
    CHECK(qfi::decode_state(0b100000, p) == doctest::Approx(0.4));
    CHECK(qfi::decode_state(0b110000, {0.2, 0.6, 0, 0, 0, 0}) == doctest::Approx(0.4));

    bool fallback = false;
    CHECK(qfi::decode_state(0, {0.3, 0.3, 0.3, 0.3, 0.3, 0.3}, &fallback) ==
          doctest::Approx(0.3));
    CHECK(fallback);

    SUBCASE("bounded by min and max of p") {
        Rng rng(53);
        for (int i = 0; i < 5000; ++i) {
            std::array<double, 6> q;
            double lo = 1.0, hi = 0.0;
            for (auto& x : q) {
                x = rng.uniform();
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            const int basis = static_cast<int>(rng.index(64));
            const double d = qfi::decode_state(basis, q);
            CHECK(d >= lo - 1e-12);
            CHECK(d <= hi + 1e-12);
        }
    }
}

TEST_CASE("denormalization") {
    const fuzzy::Bounds b{0.0, 10.0};
    CHECK(qfi::denormalize_gain(0.5, b, 1.0) == 5.0);
    CHECK(qfi::denormalize_gain(0.5, b, 1.5) == 7.5);
    CHECK(qfi::denormalize_gain(0.5, b, 3.0) == 10.0);  // clamped
    CHECK_THROWS_AS(qfi::denormalize_gain(0.5, b, 0.0), ConfigError);
}

namespace {
std::array<GainHistory, 3> constant_histories(const pid::GainTriple& g, int n = 3) {
    std::array<GainHistory, 3> h{GainHistory(8), GainHistory(8), GainHistory(8)};
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < 3; ++l) h[l].push(g);
    return h;
}
}  // namespace

TEST_CASE("consensus idempotence end to end") {
    fuzzy::ChannelBounds bounds;
    bounds.kp = {0.0, 200.0};
    bounds.kd = {0.0, 30.0};
    bounds.ki = {0.0, 120.0};
    Rng rng(59);
    for (const auto type : {CorrelationType::Spatial, CorrelationType::SpatioTemporal,
                            CorrelationType::Temporal}) {
        for (int i = 0; i < 50; ++i) {
            const double p = rng.uniform();
            // identical proposals across links and channels at fraction p
            const pid::GainTriple g{p * 200.0, p * 30.0, p * 120.0};
            const auto h = constant_histories(g);
            auto spec = spec_of(type);
            const auto res = qfi::qfi_step(spec, h, bounds);
            for (int l = 0; l < 3; ++l) {
                CHECK(res.per_link[l].kp == doctest::Approx(p * 200.0).epsilon(1e-9));
                CHECK(res.per_link[l].kd == doctest::Approx(p * 30.0).epsilon(1e-9));
                CHECK(res.per_link[l].ki == doctest::Approx(p * 120.0).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("single active controller against channel minimum") {
    fuzzy::ChannelBounds bounds;
    bounds.kp = {0.0, 100.0};
    bounds.kd = {0.0, 10.0};
    bounds.ki = {0.0, 50.0};
    std::array<GainHistory, 3> h{GainHistory(8), GainHistory(8), GainHistory(8)};
    const pid::GainTriple active{80.0, 8.0, 40.0};
    const pid::GainTriple idle{0.0, 0.0, 0.0};
    for (int k = 0; k < 2; ++k) {
        h[0].push(active);
        h[1].push(idle);
        h[2].push(idle);
    }
    const auto res = qfi::qfi_step(spec_of(CorrelationType::Spatial), h, bounds);
    CHECK(res.per_link[0].kp >= 0.0);
    CHECK(res.per_link[0].kp <= active.kp);
    CHECK(res.per_link[0].kd >= 0.0);
    CHECK(res.per_link[0].kd <= 10.0);
}

TEST_CASE("qfi_step is deterministic") {
    fuzzy::ChannelBounds bounds;
    std::array<GainHistory, 3> h{GainHistory(8), GainHistory(8), GainHistory(8)};
    Rng rng(61);
    for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 3; ++l)
            h[l].push({rng.uniform(0, 200), rng.uniform(0, 30), rng.uniform(0, 120)});
    const auto spec = spec_of(CorrelationType::SpatioTemporal);
    const auto a = qfi::qfi_step(spec, h, bounds);
    const auto b = qfi::qfi_step(spec, h, bounds);
    CHECK(a.per_link[0].kp == b.per_link[0].kp);
    CHECK(a.per_link[1].kd == b.per_link[1].kd);
    CHECK(a.per_link[2].ki == b.per_link[2].ki);
    CHECK(a.trace[0].measured_basis == b.trace[0].measured_basis);
}

TEST_CASE("empty histories rejected") {
    fuzzy::ChannelBounds bounds;
    std::array<GainHistory, 3> h{GainHistory(8), GainHistory(8), GainHistory(8)};
    CHECK_THROWS_AS(qfi::qfi_step(spec_of(CorrelationType::Spatial), h, bounds), ConfigError);
}

TEST_CASE("spec validation") {
    CorrelationSpec s;
    s.lag = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = CorrelationSpec{};
    s.scaling_kd = -1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("qga selection matches brute force on a synthetic cost") {
    // smooth cost with a known winner: temporal, optimum near (1.3, 0.9, 1.6)
    const auto cost = [](const CorrelationSpec& s) {
        const double base = s.type == CorrelationType::Temporal ? 0.1
                            : s.type == CorrelationType::Spatial ? 0.5
                                                                 : 0.9;
        const double dk = s.scaling_kp - 1.3;
        const double dd = s.scaling_kd - 0.9;
        const double di = s.scaling_ki - 1.6;
        return base + dk * dk + dd * dd + di * di;
    };
    sco::GaConfig ga;
    ga.population = 32;
    ga.generations = 25;
    ga.seed = 7;
    const auto res = qfi::qga_select_correlation(
        {CorrelationType::Spatial, CorrelationType::SpatioTemporal,
         CorrelationType::Temporal},
        cost, ga);

    // independent brute force: 5-point grid per scaling channel
    CorrelationSpec grid_best;
    double grid_cost = 1e18;
    for (const auto type : {CorrelationType::Spatial, CorrelationType::SpatioTemporal,
                            CorrelationType::Temporal})
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b)
                for (int c = 0; c < 5; ++c) {
                    CorrelationSpec s;
                    s.type = type;
                    s.scaling_kp = 0.5 + 1.5 * a / 4.0;
                    s.scaling_kd = 0.5 + 1.5 * b / 4.0;
                    s.scaling_ki = 0.5 + 1.5 * c / 4.0;
                    const double cc = cost(s);
                    if (cc < grid_cost) {
                        grid_cost = cc;
                        grid_best = s;
                    }
                }
    CHECK(res.best.type == grid_best.type);
    CHECK(res.table.size() == 3);
    double table_best = 1e18;
    for (const auto& e : res.table) table_best = std::min(table_best, e.best_cost);
    CHECK(table_best <= grid_cost + 1e-9);  // the GA refines past the coarse grid

    SUBCASE("single candidate type returns it") {
        const auto one =
            qfi::qga_select_correlation({CorrelationType::Spatial}, cost, ga);
        CHECK(one.best.type == CorrelationType::Spatial);
    }
    SUBCASE("same seed, same selection") {
        const auto again = qfi::qga_select_correlation(
            {CorrelationType::Spatial, CorrelationType::SpatioTemporal,
             CorrelationType::Temporal},
            cost, ga);
        CHECK(again.best.type == res.best.type);
        CHECK(again.best.scaling_kp == res.best.scaling_kp);
    }
}

TEST_CASE("qga hard error when everything is unstable") {
    const auto cost = [](const CorrelationSpec&) { return 150.0; };
    sco::GaConfig ga;
    ga.population = 8;
    ga.generations = 2;
    ga.seed = 1;
    CHECK_THROWS_AS(qfi::qga_select_correlation({CorrelationType::Spatial}, cost, ga),
                    NumericError);
}
