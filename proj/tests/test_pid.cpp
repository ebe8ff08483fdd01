#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qfc/errors.hpp"
#include "qfc/pid.hpp"
#include "qfc/rng.hpp"

using namespace qfc;
using pid::GainTriple;
using pid::PidState;

TEST_CASE("pure proportional") {
    const auto out = pid::pid_step(2.0, PidState{}, GainTriple{1.0, 0.0, 0.0}, 0.1);
    CHECK(out.u == doctest::Approx(2.0));
}

TEST_CASE("zero error from fresh state gives zero output") {
    const auto out = pid::pid_step(0.0, PidState{}, GainTriple{3.0, 2.0, 1.0}, 0.1);
    CHECK(out.u == 0.0);
}

TEST_CASE("trapezoid integral over two steps") {
    // constant e = 1, dt = 0.1: integral 0.05 then 0.15
    const GainTriple g{0.0, 0.0, 1.0};
    const auto s1 = pid::pid_step(1.0, PidState{}, g, 0.1);
    CHECK(s1.u == doctest::Approx(0.05));
    const auto s2 = pid::pid_step(1.0, s1.state, g, 0.1);
    CHECK(s2.u == doctest::Approx(0.15));
}

TEST_CASE("first step uses zero derivative") {
    pid::PidConfig cfg;
    cfg.torque_limit = 1000.0;
    const auto out = pid::pid_step(5.0, PidState{}, GainTriple{0.0, 1.0, 0.0}, 0.01, cfg);
    CHECK(out.u == 0.0);
    const auto out2 = pid::pid_step(6.0, out.state, GainTriple{0.0, 1.0, 0.0}, 0.01, cfg);
    CHECK(out2.u == doctest::Approx(100.0).epsilon(1e-9));  // (6-5)/0.01
}

TEST_CASE("output linear in gains before saturation") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const GainTriple g{rng.uniform(0, 5), rng.uniform(0, 2), rng.uniform(0, 3)};
        const GainTriple g2{2 * g.kp, 2 * g.kd, 2 * g.ki};
        PidState a{}, b{};
        for (int k = 0; k < 5; ++k) {
            const double e = rng.uniform(-1, 1);
            const auto oa = pid::pid_step(e, a, g, 0.01);
            const auto ob = pid::pid_step(e, b, g2, 0.01);
            a = oa.state;
            b = ob.state;
            CHECK(ob.u_raw == doctest::Approx(2.0 * oa.u_raw).epsilon(1e-12));
        }
    }
}

TEST_CASE("saturation and anti-windup") {
    pid::PidConfig cfg;
    cfg.torque_limit = 10.0;
    cfg.integral_limit = 2.0;
    PidState s{};
    for (int k = 0; k < 1000; ++k) {
        const auto out = pid::pid_step(50.0, s, GainTriple{5.0, 0.0, 3.0}, 0.01, cfg);
        s = out.state;
        CHECK(std::abs(out.u) <= 10.0);
        CHECK(std::abs(s.integral) <= 2.0);
    }
}

TEST_CASE("rejects bad inputs") {
    CHECK_THROWS_AS(pid::pid_step(1.0, PidState{}, GainTriple{}, 0.0), ConfigError);
    CHECK_THROWS_AS(pid::pid_step(std::nan(""), PidState{}, GainTriple{}, 0.1),
                    NumericError);
}
