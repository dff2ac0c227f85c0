#pragma once

#include <Eigen/Dense>

namespace cslearn::sim {

struct PendulumParams {
  double mass = 1.0;       // kg
  double length = 1.0;     // m
  double gravity = 9.81;   // m/s^2
  double damping = 0.1;    // 1/s, acts on angular velocity
  double torque_limit = 2.0;  // N*m; gravity torque peaks at m*g*l = 9.81, so
                              // direct lift is impossible and swing-up is forced
};

struct PendulumState {
  double angle = 0.0;     // rad, 0 = hanging down, grows without wrapping
  double velocity = 0.0;  // rad/s
  double torque = 0.0;    // last applied torque after saturation
};

// Semi-implicit Euler step of th'' = -(g/l) sin th + u/(m l^2) - b th'.
// The requested torque saturates at +-torque_limit.
PendulumState pendulum_step(const PendulumState& state, double u, double tick,
                            const PendulumParams& params = {});

// Kinetic plus potential energy, zero at rest hanging down. The upright
// equilibrium sits at 2 m g l.
double pendulum_energy(const PendulumState& state, const PendulumParams& params = {});

// Wrap to (-pi, pi].
double wrap_angle(double angle);

// 1 near a slow upright pose, falling off over ~0.25 rad / ~0.8 rad/s.
double upright_quality(double angle, double velocity);

// True when the catch criterion holds: within 0.1 rad of upright at less than
// 0.5 rad/s.
bool pendulum_upright(double angle, double velocity);

// Sensed channel vector [cos th, sin th, th', energy, upright quality,
// progress]. Progress is elapsed time over the episode horizon, so the clock
// channel lives on [0, 1] like the quality channel and a late trial differs
// from an on-schedule one by at most 1 in sensed space.
Eigen::VectorXd pendulum_sensed(double angle, double velocity, double progress,
                                const PendulumParams& params = {});

inline constexpr int kPendulumSensedDim = 6;

}  // namespace cslearn::sim
