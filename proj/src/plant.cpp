#include "qfc/plant.hpp"

#include <algorithm>
#include <cmath>

#include "qfc/errors.hpp"
#include "qfc/linalg.hpp"

namespace qfc::plant {
namespace {

// Velocity coefficient of cumulative angle phi_j in the COM velocity of link i:
// full link length below the COM link, COM offset on it, zero above.
double vel_coeff(const ManipulatorParams& p, int i, int j) {
    if (j < i) return p.length[j];
    if (j == i) return p.com[i];
    return 0.0;
}

Vec3 cumulative_angles(const Vec3& q) {
    return {q[0], q[0] + q[1], q[0] + q[1] + q[2]};
}

// H(phi) is the inertia matrix in cumulative-angle coordinates:
//   H_jk = S_jk * cos(phi_j - phi_k) + delta_jk * Icom_j
// with S_jk = sum_{i >= max(j,k)} m_i a_ij a_ik. M(q) = A^T H A for the
// lower-triangular ones matrix A (phi = A q), so M_ab = sum_{j>=a,k>=b} H_jk.
Mat3 structure_matrix(const ManipulatorParams& p) {
    Mat3 s{};
    for (int j = 0; j < kLinks; ++j)
        for (int k = 0; k < kLinks; ++k)
            for (int i = std::max(j, k); i < kLinks; ++i)
                s[j][k] += p.mass[i] * vel_coeff(p, i, j) * vel_coeff(p, i, k);
    return s;
}

double rod_inertia(const ManipulatorParams& p, int i) {
    return p.mass[i] * p.length[i] * p.length[i] / 12.0;
}

Mat3 h_matrix(const Vec3& phi, const Mat3& s, const ManipulatorParams& p) {
    Mat3 h{};
    for (int j = 0; j < kLinks; ++j)
        for (int k = 0; k < kLinks; ++k) {
            h[j][k] = s[j][k] * std::cos(phi[j] - phi[k]);
            if (j == k) h[j][k] += rod_inertia(p, j);
        }
    return h;
}

Mat3 fold_to_joint_coords(const Mat3& h) {
    Mat3 m{};
    for (int a = 0; a < kLinks; ++a)
        for (int b = 0; b < kLinks; ++b)
            for (int j = a; j < kLinks; ++j)
                for (int k = b; k < kLinks; ++k) m[a][b] += h[j][k];
    return m;
}

// dM/dq_l, analytic: dH_jk/dq_l = -S_jk sin(phi_j - phi_k) ([l<=j] - [l<=k]).
Mat3 mass_matrix_partial(const Vec3& phi, const Mat3& s, int l) {
    Mat3 dh{};
    for (int j = 0; j < kLinks; ++j)
        for (int k = 0; k < kLinks; ++k) {
            const int dj = (l <= j) ? 1 : 0;
            const int dk = (l <= k) ? 1 : 0;
            if (dj != dk) dh[j][k] = -s[j][k] * std::sin(phi[j] - phi[k]) * (dj - dk);
        }
    return fold_to_joint_coords(dh);
}

Vec3 gravity_torque(const Vec3& phi, const ManipulatorParams& p) {
    // V = g sum_j B_j sin(phi_j), B_j = sum_{i >= j} m_i a_ij
    Vec3 b{};
    for (int j = 0; j < kLinks; ++j)
        for (int i = j; i < kLinks; ++i) b[j] += p.mass[i] * vel_coeff(p, i, j);
    Vec3 g{};
    for (int l = 0; l < kLinks; ++l)
        for (int j = l; j < kLinks; ++j) g[l] += p.gravity * b[j] * std::cos(phi[j]);
    return g;
}

bool finite(const Vec3& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]);
}

}  // namespace

void ManipulatorParams::validate() const {
    for (int i = 0; i < kLinks; ++i) {
        if (!(mass[i] > 0.0) || !(length[i] > 0.0))
            throw ConfigError("plant: masses and lengths must be positive");
        if (com[i] < 0.0 || com[i] > length[i])
            throw ConfigError("plant: COM offset outside the link");
        if (friction[i] < 0.0) throw ConfigError("plant: negative friction");
    }
}

Mat3 mass_matrix(const Vec3& q, const ManipulatorParams& p) {
    return fold_to_joint_coords(h_matrix(cumulative_angles(q), structure_matrix(p), p));
}

Derivative manipulator_dynamics(const PlantState& s, const Vec3& torque,
                                const ManipulatorParams& p) {
    if (!finite(s.q) || !finite(s.qdot) || !finite(torque))
        throw NumericError("plant: non-finite state or torque");

    const Vec3 phi = cumulative_angles(s.q);
    const Mat3 sm = structure_matrix(p);
    const Mat3 m = fold_to_joint_coords(h_matrix(phi, sm, p));

    std::array<Mat3, 3> dm;
    for (int l = 0; l < kLinks; ++l) dm[l] = mass_matrix_partial(phi, sm, l);

    // Coriolis/centrifugal via Christoffel symbols of the first kind.
    Vec3 cor{};
    for (int i = 0; i < kLinks; ++i)
        for (int j = 0; j < kLinks; ++j)
            for (int k = 0; k < kLinks; ++k) {
                const double c = 0.5 * (dm[k][i][j] + dm[j][i][k] - dm[i][j][k]);
                cor[i] += c * s.qdot[j] * s.qdot[k];
            }

    const Vec3 grav = gravity_torque(phi, p);

    std::vector<double> rhs(3), mflat(9);
    for (int i = 0; i < kLinks; ++i) {
        rhs[static_cast<size_t>(i)] =
            torque[i] - cor[i] - grav[i] - p.friction[i] * s.qdot[i];
        for (int j = 0; j < kLinks; ++j) mflat[static_cast<size_t>(i * 3 + j)] = m[i][j];
    }
    const auto qdd = solve_spd(std::move(mflat), std::move(rhs), "plant mass matrix");

    Derivative d;
    d.qdot = s.qdot;
    d.qddot = {qdd[0], qdd[1], qdd[2]};
    return d;
}

double total_energy(const PlantState& s, const ManipulatorParams& p) {
    const Vec3 phi = cumulative_angles(s.q);
    const Mat3 m = mass_matrix(s.q, p);
    double ke = 0.0;
    for (int i = 0; i < kLinks; ++i)
        for (int j = 0; j < kLinks; ++j) ke += 0.5 * m[i][j] * s.qdot[i] * s.qdot[j];
    double pe = 0.0;
    for (int j = 0; j < kLinks; ++j) {
        double b = 0.0;
        for (int i = j; i < kLinks; ++i) b += p.mass[i] * vel_coeff(p, i, j);
        pe += p.gravity * b * std::sin(phi[j]);
    }
    return ke + pe;
}

PlantState integrate_step(const PlantState& s, const Vec3& torque, double dt,
                          const ManipulatorParams& p) {
    if (!(dt > 0.0)) throw ConfigError("integrate_step: dt must be positive");

    const auto eval = [&](const PlantState& st) { return manipulator_dynamics(st, torque, p); };
    const auto advance = [&](const PlantState& st, const Derivative& d, double h) {
        PlantState out = st;
        for (int i = 0; i < kLinks; ++i) {
            out.q[i] = s.q[i] + h * d.qdot[i];
            out.qdot[i] = s.qdot[i] + h * d.qddot[i];
        }
        return out;
    };

    const Derivative k1 = eval(s);
    const Derivative k2 = eval(advance(s, k1, dt / 2.0));
    const Derivative k3 = eval(advance(s, k2, dt / 2.0));
    const Derivative k4 = eval(advance(s, k3, dt));

    PlantState out = s;
    for (int i = 0; i < kLinks; ++i) {
        out.q[i] = s.q[i] + dt / 6.0 * (k1.qdot[i] + 2.0 * k2.qdot[i] + 2.0 * k3.qdot[i] + k4.qdot[i]);
        out.qdot[i] =
            s.qdot[i] + dt / 6.0 * (k1.qddot[i] + 2.0 * k2.qddot[i] + 2.0 * k3.qddot[i] + k4.qddot[i]);
    }
    out.t = s.t + dt;
    if (!finite(out.q) || !finite(out.qdot))
        throw NumericError("integrate_step: non-finite state at t=" + std::to_string(out.t));
    return out;
}

PlantState apply_forced_displacement(const PlantState& s, const DisturbanceEvent& ev) {
    if (ev.kind != DisturbanceKind::ForcedDisplacement)
        throw ConfigError("apply_forced_displacement: wrong event kind");
    if (ev.link < 1 || ev.link > kLinks)
        throw ConfigError("apply_forced_displacement: link index out of range");
    PlantState out = s;
    out.q[ev.link - 1] += ev.magnitude;
    return out;
}

double rate_limit(double command, double previous, double limit) {
    return previous + std::clamp(command - previous, -limit, limit);
}

}  // namespace qfc::plant
