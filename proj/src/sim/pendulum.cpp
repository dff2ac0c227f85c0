#include "cslearn/sim/pendulum.hpp"

#include <algorithm>
#include <cmath>

namespace cslearn::sim {

PendulumState pendulum_step(const PendulumState& state, double u, double tick,
                            const PendulumParams& params) {
  const double torque = std::clamp(u, -params.torque_limit, params.torque_limit);
  const double inertia = params.mass * params.length * params.length;
  const double accel = -(params.gravity / params.length) * std::sin(state.angle) +
                       torque / inertia - params.damping * state.velocity;
  PendulumState next;
  next.velocity = state.velocity + tick * accel;
  next.angle = state.angle + tick * next.velocity;
  next.torque = torque;
  return next;
}

double pendulum_energy(const PendulumState& state, const PendulumParams& params) {
  const double inertia = params.mass * params.length * params.length;
  return 0.5 * inertia * state.velocity * state.velocity +
         params.mass * params.gravity * params.length * (1.0 - std::cos(state.angle));
}

double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * M_PI);
  if (wrapped <= -M_PI) wrapped += 2.0 * M_PI;
  return wrapped;
}

double upright_quality(double angle, double velocity) {
  const double off = wrap_angle(angle - M_PI) / 0.25;
  const double spin = velocity / 0.8;
  return std::exp(-off * off - spin * spin);
}

bool pendulum_upright(double angle, double velocity) {
  return std::abs(wrap_angle(angle - M_PI)) < 0.1 && std::abs(velocity) < 0.5;
}

Eigen::VectorXd pendulum_sensed(double angle, double velocity, double progress,
                                const PendulumParams& params) {
  PendulumState s;
  s.angle = angle;
  s.velocity = velocity;
  Eigen::VectorXd out(kPendulumSensedDim);
  out << std::cos(angle), std::sin(angle), velocity, pendulum_energy(s, params),
      upright_quality(angle, velocity), progress;
  return out;
}

}  // namespace cslearn::sim
