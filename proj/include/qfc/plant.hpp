#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace qfc::plant {

inline constexpr int kLinks = 3;

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct PlantState {
    Vec3 q{};     // joint angles, rad
    Vec3 qdot{};  // joint velocities, rad/s
    double t = 0.0;
};

// Planar 3-link arm in the vertical plane, revolute joints, gravity along -y.
// Links are uniform thin rods (I = m*L^2/12 about the COM). Friction defaults
// model geared desk-scale actuators; the sampled control loop relies on this
// structural damping because the shared derivative gain is capped low.
struct ManipulatorParams {
    Vec3 mass{1.0, 0.8, 0.5};      // kg
    Vec3 length{0.5, 0.4, 0.3};    // m
    Vec3 com{0.25, 0.2, 0.15};     // m, COM offset from the joint along the link
    double gravity = 9.81;         // m/s^2
    Vec3 friction{6.0, 1.5, 0.2};  // N*m*s/rad viscous

    void validate() const;  // masses/lengths > 0, friction >= 0
};

struct Derivative {
    Vec3 qdot{};
    Vec3 qddot{};
};

enum class DisturbanceKind { ForcedDisplacement, RateLimitChange };

// External/internal contingency event. Triggered by time or by control-loop
// iteration index (whichever is set; trigger_iteration < 0 means time-based).
struct DisturbanceEvent {
    DisturbanceKind kind = DisturbanceKind::ForcedDisplacement;
    double trigger_time = 0.0;
    int trigger_iteration = -1;
    int link = 1;            // 1-based
    double magnitude = 0.0;  // rad for displacement, deg/iteration for rate limits
};

// Mass matrix, symmetric positive definite for valid params.
Mat3 mass_matrix(const Vec3& q, const ManipulatorParams& p);

// qddot = M(q)^-1 (tau - C(q,qd)qd - G(q) - F qd).
Derivative manipulator_dynamics(const PlantState& s, const Vec3& torque,
                                const ManipulatorParams& p);

// Kinetic + potential energy of the current state.
double total_energy(const PlantState& s, const ManipulatorParams& p);

// Classical RK4 with zero-order-hold torque; t advances by exactly dt.
PlantState integrate_step(const PlantState& s, const Vec3& torque, double dt,
                          const ManipulatorParams& p);

// Instantaneous joint displacement; velocities untouched.
PlantState apply_forced_displacement(const PlantState& s, const DisturbanceEvent& ev);

// Moves previous toward command by at most limit (all in degrees).
double rate_limit(double command, double previous, double limit);

}  // namespace qfc::plant
