#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "bdgx/errors.hpp"
#include "bdgx/rng.hpp"

namespace bdgx {

/// Multipliers applied to the canonical physics. All 1.0 reproduces the
/// canonical (target) dynamics bitwise.
struct PhysicsKnobs {
    double gravity_scale = 1.0;
    double friction_scale = 1.0;
    double mass_scale = 1.0;

    // mass_scale must stay positive (it divides); gravity/friction may be
    // zeroed, which several force-free test configurations rely on.
    bool valid() const { return gravity_scale >= 0 && friction_scale >= 0 && mass_scale > 0; }
    bool is_canonical() const {
        return gravity_scale == 1.0 && friction_scale == 1.0 && mass_scale == 1.0;
    }
};

enum class EnvId { pointmass, pendulum };

inline const char* to_string(EnvId id) { return id == EnvId::pointmass ? "pointmass" : "pendulum"; }

inline EnvId env_id_from_string(const std::string& s) {
    if (s == "pointmass") return EnvId::pointmass;
    if (s == "pendulum") return EnvId::pendulum;
    throw ConfigError("unknown env id '" + s + "'");
}

/// Observation plus episode step index. Point-mass observations are
/// [x, y, vx, vy]; pendulum observations are [cos(theta), sin(theta), theta_dot].
struct EnvState {
    std::vector<double> obs;
    int step_index = 0;
};

struct EnvSpec {
    EnvId id = EnvId::pointmass;
    PhysicsKnobs knobs;
    double dt = 0.05;
    int horizon = 200;
    std::array<double, 2> goal = {0.0, 0.0};
    // Pendulum only: restores the 0.001*a^2 control-cost term, which makes
    // the reward depend on the action and therefore breaks the R(s, s')
    // assumption. Off by default.
    bool pendulum_action_cost = false;

    std::size_t obs_dim() const { return id == EnvId::pointmass ? 4 : 3; }
    std::size_t action_dim() const { return id == EnvId::pointmass ? 2 : 1; }

    void validate() const {
        if (dt <= 0.0) throw ConfigError("env: dt must be > 0");
        if (horizon < 1) throw ConfigError("env: horizon must be >= 1");
        if (!knobs.valid()) {
            throw ConfigError("env: gravity/friction scales must be >= 0 and mass scale > 0");
        }
    }
};

namespace env_detail {

constexpr double kPointmassForceMax = 10.0;  // N
constexpr double kPointmassGravity = 9.8;    // m/s^2, along -y
constexpr double kPointmassFriction = 0.5;   // 1/s
constexpr double kPointmassMass = 1.0;       // kg
constexpr double kArenaHalf = 5.0;           // m
constexpr double kVelocityMax = 10.0;        // m/s

constexpr double kPendulumGravity = 9.8;
constexpr double kPendulumMass = 1.0;
constexpr double kPendulumLength = 1.0;
constexpr double kPendulumDamping = 0.1;  // s^-1, scaled by friction_scale
constexpr double kPendulumTorqueMax = 2.0;
constexpr double kPendulumSpeedMax = 8.0;

inline double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

inline double wrap_angle(double theta) {
    theta = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (theta < 0) theta += 2.0 * M_PI;
    return theta - M_PI;
}

/// Pendulum angular acceleration. theta = 0 is upright (the unstable goal).
inline double pendulum_accel(const EnvSpec& spec, double theta, double theta_dot, double torque) {
    const double g = kPendulumGravity * spec.knobs.gravity_scale;
    const double m = kPendulumMass * spec.knobs.mass_scale;
    const double l = kPendulumLength;
    return 3.0 * g / (2.0 * l) * std::sin(theta) + 3.0 * torque / (m * l * l) -
           kPendulumDamping * spec.knobs.friction_scale * theta_dot;
}

}  // namespace env_detail

struct StepResult {
    EnvState next;
    double reward = 0.0;
    bool done = false;
    int clipped_action_components = 0;
};

/// Reward as a pure function of (s, s'). The action argument only
/// participates for the pendulum when the control-cost term is enabled.
inline double env_reward(const EnvSpec& spec, std::span<const double> /*obs*/,
                         std::span<const double> action, std::span<const double> next_obs) {
    if (spec.id == EnvId::pointmass) {
        const double dx = next_obs[0] - spec.goal[0];
        const double dy = next_obs[1] - spec.goal[1];
        return -std::sqrt(dx * dx + dy * dy);
    }
    const double theta = std::atan2(next_obs[1], next_obs[0]);
    const double theta_dot = next_obs[2];
    double r = -(theta * theta + 0.1 * theta_dot * theta_dot);
    if (spec.pendulum_action_cost) {
        const double u = env_detail::kPendulumTorqueMax * action[0];
        r -= 0.001 * u * u;
    }
    return r;
}

template <typename RngT>
EnvState env_reset(const EnvSpec& spec, RngT& rng) {
    spec.validate();
    EnvState state;
    state.step_index = 0;
    if (spec.id == EnvId::pointmass) {
        const double x = rng.uniform(-4.0, 4.0);
        const double y = rng.uniform(-4.0, 4.0);
        state.obs = {x, y, 0.0, 0.0};
    } else {
        const double theta = rng.uniform(-M_PI, M_PI);
        const double theta_dot = rng.uniform(-1.0, 1.0);
        state.obs = {std::cos(theta), std::sin(theta), theta_dot};
    }
    return state;
}

/// Forces the environment to continue from the given state, clipping
/// positions/velocities into bounds and renormalizing the pendulum's angle
/// encoding onto the unit circle.
inline EnvState env_set_state(const EnvSpec& spec, const EnvState& state) {
    using namespace env_detail;
    if (state.obs.size() != spec.obs_dim()) {
        throw DimensionError("env_set_state: observation size " +
                             std::to_string(state.obs.size()) + " != " +
                             std::to_string(spec.obs_dim()));
    }
    for (double v : state.obs) {
        if (!std::isfinite(v)) {
            throw NumericalError("env_set_state: non-finite component at step " +
                                 std::to_string(state.step_index));
        }
    }
    EnvState out = state;
    if (spec.id == EnvId::pointmass) {
        out.obs[0] = clip(out.obs[0], -kArenaHalf, kArenaHalf);
        out.obs[1] = clip(out.obs[1], -kArenaHalf, kArenaHalf);
        out.obs[2] = clip(out.obs[2], -kVelocityMax, kVelocityMax);
        out.obs[3] = clip(out.obs[3], -kVelocityMax, kVelocityMax);
    } else {
        const double norm = std::hypot(out.obs[0], out.obs[1]);
        if (norm < 1e-6) {
            throw NumericalError("env_set_state: degenerate pendulum angle encoding");
        }
        out.obs[0] /= norm;
        out.obs[1] /= norm;
        out.obs[2] = clip(out.obs[2], -kPendulumSpeedMax, kPendulumSpeedMax);
    }
    return out;
}

inline StepResult env_step(const EnvSpec& spec, const EnvState& state,
                           std::span<const double> action) {
    using namespace env_detail;
    spec.validate();
    if (state.obs.size() != spec.obs_dim()) {
        throw DimensionError("env_step: observation size mismatch");
    }
    if (action.size() != spec.action_dim()) {
        throw DimensionError("env_step: action size " + std::to_string(action.size()) +
                             " != " + std::to_string(spec.action_dim()));
    }
    for (double v : state.obs) {
        if (!std::isfinite(v)) {
            throw NumericalError("env_step: non-finite state at step " +
                                 std::to_string(state.step_index));
        }
    }

    StepResult result;
    std::vector<double> a(action.begin(), action.end());
    for (double& v : a) {
        if (v < -1.0 || v > 1.0) {
            v = clip(v, -1.0, 1.0);
            ++result.clipped_action_components;
        }
    }

    result.next.step_index = state.step_index + 1;
    if (spec.id == EnvId::pointmass) {
        // Semi-implicit Euler: velocity first, then position with the new velocity.
        const double inv_mass = 1.0 / (kPointmassMass * spec.knobs.mass_scale);
        const double g = kPointmassGravity * spec.knobs.gravity_scale;
        const double c = kPointmassFriction * spec.knobs.friction_scale;
        double vx = state.obs[2], vy = state.obs[3];
        const double ax = kPointmassForceMax * a[0] * inv_mass - c * vx;
        const double ay = kPointmassForceMax * a[1] * inv_mass - g - c * vy;
        vx = clip(vx + spec.dt * ax, -kVelocityMax, kVelocityMax);
        vy = clip(vy + spec.dt * ay, -kVelocityMax, kVelocityMax);
        const double x = clip(state.obs[0] + spec.dt * vx, -kArenaHalf, kArenaHalf);
        const double y = clip(state.obs[1] + spec.dt * vy, -kArenaHalf, kArenaHalf);
        result.next.obs = {x, y, vx, vy};
    } else {
        // RK4 on (theta, theta_dot) with the torque held constant over the step.
        const double torque = kPendulumTorqueMax * a[0];
        double theta = std::atan2(state.obs[1], state.obs[0]);
        double theta_dot = state.obs[2];
        const double h = spec.dt;
        const double k1v = pendulum_accel(spec, theta, theta_dot, torque);
        const double k1x = theta_dot;
        const double k2v = pendulum_accel(spec, theta + 0.5 * h * k1x,
                                          theta_dot + 0.5 * h * k1v, torque);
        const double k2x = theta_dot + 0.5 * h * k1v;
        const double k3v = pendulum_accel(spec, theta + 0.5 * h * k2x,
                                          theta_dot + 0.5 * h * k2v, torque);
        const double k3x = theta_dot + 0.5 * h * k2v;
        const double k4v = pendulum_accel(spec, theta + h * k3x, theta_dot + h * k3v, torque);
        const double k4x = theta_dot + h * k3v;
        theta += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        theta_dot += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        theta_dot = clip(theta_dot, -kPendulumSpeedMax, kPendulumSpeedMax);
        result.next.obs = {std::cos(theta), std::sin(theta), theta_dot};
    }

    for (double v : result.next.obs) {
        if (!std::isfinite(v)) {
            throw NumericalError("env_step: produced non-finite state at step " +
                                 std::to_string(result.next.step_index));
        }
    }
    result.reward = env_reward(spec, state.obs, a, result.next.obs);
    result.done = result.next.step_index >= spec.horizon;
    return result;
}

/// Total mechanical energy of the pendulum, for integrator sanity checks.
inline double pendulum_energy(const EnvSpec& spec, const EnvState& state) {
    using namespace env_detail;
    const double m = kPendulumMass * spec.knobs.mass_scale;
    const double l = kPendulumLength;
    const double g = kPendulumGravity * spec.knobs.gravity_scale;
    const double theta_dot = state.obs[2];
    const double cos_theta = state.obs[0];
    return 0.5 * (m * l * l / 3.0) * theta_dot * theta_dot + 0.5 * m * g * l * cos_theta;
}

inline EnvSpec make_pointmass_spec(PhysicsKnobs knobs = {}) {
    EnvSpec spec;
    spec.id = EnvId::pointmass;
    spec.knobs = knobs;
    spec.dt = 0.05;
    spec.horizon = 200;
    spec.goal = {0.0, 0.0};
    return spec;
}

inline EnvSpec make_pendulum_spec(PhysicsKnobs knobs = {}) {
    EnvSpec spec;
    spec.id = EnvId::pendulum;
    spec.knobs = knobs;
    spec.dt = 0.05;
    spec.horizon = 200;
    return spec;
}

}  // namespace bdgx
