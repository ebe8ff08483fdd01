#pragma once

#include <algorithm>
#include <cmath>

#include "qfc/errors.hpp"

namespace qfc::pid {

struct GainTriple {
    double kp = 0.0;
    double kd = 0.0;
    double ki = 0.0;
};

struct PidConfig {
    double torque_limit = 20.0;    // N*m output saturation
    double integral_limit = 10.0;  // anti-windup clamp, error*s
};

struct PidState {
    double integral = 0.0;
    double prev_error = 0.0;
    bool fresh = true;  // first step uses a zero derivative
};

struct PidOutput {
    double u = 0.0;      // saturated control
    double u_raw = 0.0;  // pre-saturation, linear in the gains
    PidState state;
};

// u = Kp*e + Ki*Integral(e) + Kd*de/dt. Trapezoid-rule integral with
// anti-windup clamp, backward-difference derivative.
inline PidOutput pid_step(double error, const PidState& s, const GainTriple& g,
                          double dt, const PidConfig& cfg = {}) {
    if (!(dt > 0.0)) throw ConfigError("pid_step: dt must be positive");
    if (!std::isfinite(error)) throw NumericError("pid_step: non-finite error");

    PidOutput out;
    out.state = s;
    out.state.integral += dt * 0.5 * (s.prev_error + error);
    out.state.integral =
        std::clamp(out.state.integral, -cfg.integral_limit, cfg.integral_limit);

    const double derivative = s.fresh ? 0.0 : (error - s.prev_error) / dt;
    out.state.prev_error = error;
    out.state.fresh = false;

    out.u_raw = g.kp * error + g.ki * out.state.integral + g.kd * derivative;
    out.u = std::clamp(out.u_raw, -cfg.torque_limit, cfg.torque_limit);
    return out;
}

}  // namespace qfc::pid
