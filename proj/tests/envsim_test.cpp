#include <gtest/gtest.h>

#include <cmath>

#include "bdgx/env.hpp"
#include "bdgx/rng.hpp"

using namespace bdgx;

namespace {

// Forces every uniform draw to the interval midpoint.
struct MidpointRng {
    double uniform(double lo, double hi) { return 0.5 * (lo + hi); }
};

}  // namespace

TEST(EnvReset, MidpointDrawsGiveOrigin) {
    MidpointRng rng;
    EnvState pm = env_reset(make_pointmass_spec(), rng);
    EXPECT_EQ(pm.obs, (std::vector<double>{0, 0, 0, 0}));

    EnvState pend = env_reset(make_pendulum_spec(), rng);
    EXPECT_DOUBLE_EQ(pend.obs[0], 1.0);  // cos(0)
    EXPECT_DOUBLE_EQ(pend.obs[1], 0.0);  // sin(0)
    EXPECT_DOUBLE_EQ(pend.obs[2], 0.0);
}

TEST(EnvReset, SameSeedSameState) {
    Rng a(42), b(42);
    EnvState sa = env_reset(make_pointmass_spec(), a);
    EnvState sb = env_reset(make_pointmass_spec(), b);
    EXPECT_EQ(sa.obs, sb.obs);
}

TEST(EnvReset, EmpiricalPositionMeanNearOrigin) {
    Rng rng(7);
    const EnvSpec spec = make_pointmass_spec();
    double mx = 0, my = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        EnvState s = env_reset(spec, rng);
        mx += s.obs[0];
        my += s.obs[1];
    }
    EXPECT_LT(std::abs(mx / n), 0.1);
    EXPECT_LT(std::abs(my / n), 0.1);
}

TEST(EnvStep, ZeroForceFixedPoint) {
    EnvSpec spec = make_pointmass_spec({.gravity_scale = 0.0});
    EnvState s;
    s.obs = {1.0, 1.0, 0.0, 0.0};
    const std::vector<double> a = {0.0, 0.0};
    StepResult r = env_step(spec, s, a);
    EXPECT_EQ(r.next.obs, s.obs);
    const double expected = -std::hypot(1.0 - spec.goal[0], 1.0 - spec.goal[1]);
    EXPECT_DOUBLE_EQ(r.reward, expected);
}

TEST(EnvStep, GravityHandValue) {
    // v'_y = 0 + dt * (-g) = -9.8 * 0.05 = -0.49 with a = 0, v = 0.
    EnvSpec spec = make_pointmass_spec();
    EnvState s;
    s.obs = {0.0, 0.0, 0.0, 0.0};
    StepResult r = env_step(spec, s, std::vector<double>{0.0, 0.0});
    EXPECT_DOUBLE_EQ(r.next.obs[3], -0.49);
    EXPECT_DOUBLE_EQ(r.next.obs[2], 0.0);
    // Position integrates the new velocity (semi-implicit).
    EXPECT_DOUBLE_EQ(r.next.obs[1], -0.49 * 0.05);
}

TEST(EnvStep, PendulumUprightRestIsRewardZeroFixedPoint) {
    EnvSpec spec = make_pendulum_spec();
    EnvState s;
    s.obs = {1.0, 0.0, 0.0};  // theta = 0 upright, at rest
    StepResult r = env_step(spec, s, std::vector<double>{0.0});
    EXPECT_DOUBLE_EQ(r.reward, 0.0);
    EXPECT_NEAR(r.next.obs[0], 1.0, 1e-12);
    EXPECT_NEAR(r.next.obs[1], 0.0, 1e-12);
}

TEST(EnvStep, ActionClippingIsCountedAndApplied) {
    EnvSpec spec = make_pointmass_spec({.gravity_scale = 0.0});
    EnvState s;
    s.obs = {0.0, 0.0, 0.0, 0.0};
    StepResult wild = env_step(spec, s, std::vector<double>{5.0, -0.5});
    StepResult tame = env_step(spec, s, std::vector<double>{1.0, -0.5});
    EXPECT_EQ(wild.clipped_action_components, 1);
    EXPECT_EQ(tame.clipped_action_components, 0);
    EXPECT_EQ(wild.next.obs, tame.next.obs);
}

TEST(EnvStep, DoneOnlyAtHorizon) {
    EnvSpec spec = make_pointmass_spec();
    spec.horizon = 3;
    Rng rng(1);
    EnvState s = env_reset(spec, rng);
    const std::vector<double> a = {0.1, 0.1};
    StepResult r1 = env_step(spec, s, a);
    EXPECT_FALSE(r1.done);
    StepResult r2 = env_step(spec, r1.next, a);
    EXPECT_FALSE(r2.done);
    StepResult r3 = env_step(spec, r2.next, a);
    EXPECT_TRUE(r3.done);
}

TEST(EnvSetState, PreservedUnderZeroForce) {
    EnvSpec spec = make_pointmass_spec({.gravity_scale = 0.0, .friction_scale = 0.0});
    EnvState forced;
    forced.obs = {2.0, -3.0, 0.0, 0.0};
    EnvState s = env_set_state(spec, forced);
    EXPECT_EQ(s.obs, forced.obs);
    StepResult r = env_step(spec, s, std::vector<double>{0.0, 0.0});
    EXPECT_EQ(r.next.obs, forced.obs);
}

TEST(EnvSetState, OutOfBoundPositionIsClipped) {
    EnvSpec spec = make_pointmass_spec();
    EnvState forced;
    forced.obs = {9.0, 9.0, 0.0, 0.0};
    EnvState s = env_set_state(spec, forced);
    EXPECT_DOUBLE_EQ(s.obs[0], 5.0);
    EXPECT_DOUBLE_EQ(s.obs[1], 5.0);
}

TEST(EnvSetState, PendulumEncodingRenormalized) {
    EnvSpec spec = make_pendulum_spec();
    EnvState forced;
    forced.obs = {0.6, 0.9, 20.0};
    EnvState s = env_set_state(spec, forced);
    EXPECT_NEAR(s.obs[0] * s.obs[0] + s.obs[1] * s.obs[1], 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(s.obs[2], 8.0);
}

TEST(EnvSetState, NonFiniteRejected) {
    EnvSpec spec = make_pointmass_spec();
    EnvState forced;
    forced.obs = {std::nan(""), 0.0, 0.0, 0.0};
    EXPECT_THROW(env_set_state(spec, forced), NumericalError);
}

TEST(EnvStep, BitwiseDeterminism) {
    EnvSpec spec = make_pointmass_spec({.gravity_scale = 2.0});
    EnvState s;
    s.obs = {1.0, 2.0, -0.5, 0.25};
    const std::vector<double> a = {0.3, -0.8};
    StepResult r1 = env_step(spec, s, a);
    StepResult r2 = env_step(spec, s, a);
    EXPECT_EQ(r1.next.obs, r2.next.obs);
    EXPECT_EQ(r1.reward, r2.reward);
}

TEST(EnvInvariant, UnitKnobsMatchCanonicalBitwise) {
    // Knob identity: explicit 1.0 scales agree bitwise with the default spec.
    EnvSpec canonical = make_pointmass_spec();
    EnvSpec scaled = make_pointmass_spec({1.0, 1.0, 1.0});
    Rng rng(3);
    EnvState s = env_reset(canonical, rng);
    std::vector<double> a = {0.7, -0.2};
    for (int i = 0; i < 50; ++i) {
        StepResult rc = env_step(canonical, s, a);
        StepResult rs = env_step(scaled, s, a);
        ASSERT_EQ(rc.next.obs, rs.next.obs);
        ASSERT_EQ(rc.reward, rs.reward);
        s = rc.next;
    }
}

TEST(EnvInvariant, PendulumEnergyConservedWithoutFrictionOrTorque) {
    EnvSpec spec = make_pendulum_spec({.friction_scale = 0.0});
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        EnvState s = env_reset(spec, rng);
        const double e0 = pendulum_energy(spec, s);
        double max_drift = 0.0;
        for (int t = 0; t < spec.horizon; ++t) {
            StepResult r = env_step(spec, s, std::vector<double>{0.0});
            s = r.next;
            max_drift = std::max(max_drift, std::abs(pendulum_energy(spec, s) - e0));
        }
        // Energy scale: m g l / 2 bounds the potential term.
        const double scale = 4.9;
        EXPECT_LT(max_drift / scale, 0.01) << "trial " << trial;
    }
}

TEST(EnvInvariant, RewardIsPureFunctionOfStatePair) {
    EnvSpec spec = make_pointmass_spec({.gravity_scale = 2.0});
    Rng rng(11);
    EnvState s = env_reset(spec, rng);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        StepResult r = env_step(spec, s, a);
        EXPECT_EQ(r.reward, env_reward(spec, s.obs, a, r.next.obs));
        s = r.next;
    }
}

TEST(EnvSpec, ValidationErrors) {
    EnvSpec spec = make_pointmass_spec();
    spec.dt = 0.0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = make_pointmass_spec();
    spec.horizon = 0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec = make_pointmass_spec();
    spec.knobs.mass_scale = 0.0;
    EXPECT_THROW(spec.validate(), ConfigError);
}
