#include "cslearn/sim/nunchaku.hpp"

#include "cslearn/error.hpp"

#include <algorithm>
#include <cmath>

namespace cslearn::sim {

const char* grip_mode_name(GripMode mode) {
  switch (mode) {
    case GripMode::firm: return "firm";
    case GripMode::released: return "released";
    case GripMode::back_palm: return "back_palm";
    case GripMode::regrasped: return "regrasped";
  }
  return "?";
}

namespace {

const char* command_name(GripCommand cmd) {
  switch (cmd) {
    case GripCommand::none: return "none";
    case GripCommand::release: return "release";
    case GripCommand::back_palm: return "back_palm";
    case GripCommand::regrasp: return "regrasp";
  }
  return "?";
}

double mode_damping(GripMode mode, const NunchakuParams& params) {
  switch (mode) {
    case GripMode::firm: return params.damping_firm;
    case GripMode::released: return params.damping_released;
    case GripMode::back_palm: return params.damping_back_palm;
    case GripMode::regrasped: return 0.0;
  }
  return 0.0;
}

}  // namespace

double rod_tension(const NunchakuState& state, double ax, double ay,
                   const NunchakuParams& params) {
  // Pivot-frame centripetal balance: the chain carries the centrifugal pull
  // plus the projection of gravity and hand acceleration onto the rod.
  return params.free_mass *
         (params.free_length * state.stick_rate * state.stick_rate +
          (params.gravity + ay) * std::cos(state.stick_angle) -
          ax * std::sin(state.stick_angle));
}

double regrasp_quality(const NunchakuState& state) {
  if (!state.flipped) return 0.0;
  const double off = std::remainder(state.stick_angle, 2.0 * M_PI) / 0.5;
  const double spin = state.stick_rate / 4.0;
  return std::exp(-off * off - spin * spin);
}

NunchakuState nunchaku_step(const NunchakuState& state, double ax, double ay,
                            GripCommand cmd, double tick,
                            const NunchakuParams& params) {
  NunchakuState next = state;

  switch (cmd) {
    case GripCommand::none:
      break;
    case GripCommand::release:
      if (state.mode != GripMode::firm)
        throw Error(std::string("grip command 'release' is illegal in mode '") +
                    grip_mode_name(state.mode) + "'");
      next.mode = GripMode::released;
      next.flipped = false;
      break;
    case GripCommand::back_palm:
      if (state.mode != GripMode::released)
        throw Error(std::string("grip command 'back_palm' is illegal in mode '") +
                    grip_mode_name(state.mode) + "'");
      next.mode = GripMode::back_palm;
      break;
    case GripCommand::regrasp:
      if (state.mode != GripMode::back_palm)
        throw Error(std::string("grip command 'regrasp' is illegal in mode '") +
                    grip_mode_name(state.mode) + "'");
      next.mode = GripMode::regrasped;
      next.grasp_quality = regrasp_quality(state);
      break;
    default:
      throw Error(std::string("unknown grip command '") + command_name(cmd) + "'");
  }

  ax = std::clamp(ax, -params.accel_limit, params.accel_limit);
  ay = std::clamp(ay, -params.accel_limit, params.accel_limit);
  next.hand_vx += tick * ax;
  next.hand_vy += tick * ay;
  next.hand_x += tick * next.hand_vx;
  next.hand_y += tick * next.hand_vy;

  if (next.mode == GripMode::regrasped) {
    // Both sticks held: residual swing bleeds off against the grip.
    next.stick_rate *= std::exp(-30.0 * tick);
    next.stick_angle += tick * next.stick_rate;
  } else {
    const double accel =
        -((params.gravity + ay) * std::sin(next.stick_angle) +
          ax * std::cos(next.stick_angle)) /
            params.free_length -
        mode_damping(next.mode, params) * next.stick_rate;
    next.stick_rate += tick * accel;
    next.stick_angle += tick * next.stick_rate;
    if (next.mode != GripMode::firm && std::abs(next.stick_angle) > M_PI)
      next.flipped = true;
  }

  const double tension = rod_tension(next, ax, ay, params);
  next.wrist_load = std::abs(tension);
  switch (next.mode) {
    case GripMode::firm:
      next.contact = 0.0;
      break;
    case GripMode::released:
      // Chain drag over the palm: only after the stick has come over the top
      // and is descending onto the back of the hand.
      next.contact = next.flipped
                         ? params.contact_gain *
                               std::max(0.0, -std::cos(next.stick_angle)) *
                               next.wrist_load
                         : 0.0;
      break;
    case GripMode::back_palm: {
      // A pressure pad reads steady load, not bounce: misalignment and swing
      // both wash the reading out, so the level separates settled from wild.
      const double align = std::remainder(next.stick_angle, 2.0 * M_PI) / 0.6;
      next.contact = params.contact_gain * next.wrist_load *
                     std::exp(-align * align) /
                     (1.0 + next.stick_rate * next.stick_rate);
      break;
    }
    case GripMode::regrasped:
      next.contact = params.grasp_contact * next.grasp_quality;
      break;
  }
  return next;
}

Eigen::VectorXd nunchaku_sensed(const NunchakuState& state, double progress) {
  Eigen::VectorXd out(kNunchakuSensedDim);
  out << state.contact, state.wrist_load, state.hand_x, state.hand_y,
      state.hand_vx, state.hand_vy, progress;
  return out;
}

}  // namespace cslearn::sim
