#pragma once

#include <Eigen/Dense>

#include <string>

namespace cslearn::sim {

// Grip phases of the held stick, in the order a flip passes through them.
enum class GripMode { firm, released, back_palm, regrasped };

// Discrete grip commands issued by transition firings. Each one is legal in
// exactly one mode; anything else is a physical impossibility and throws.
enum class GripCommand { none, release, back_palm, regrasp };

const char* grip_mode_name(GripMode mode);

struct NunchakuParams {
  double free_mass = 0.2;     // kg, free stick
  double free_length = 0.3;   // m, chain pivot to free stick center of mass
  double gravity = 9.81;
  double damping_firm = 0.4;      // chain friction while the held stick is gripped
  double damping_released = 0.05; // nearly free flight
  double damping_back_palm = 2.5; // palm contact soaks up swing energy quickly
  double accel_limit = 30.0;      // m/s^2 per axis on the hand
  double contact_gain = 0.5;      // palm contact per unit rod tension
  double grasp_contact = 4.0;     // contact level of a full regrasp at quality 1
};

struct NunchakuState {
  double hand_x = 0.0, hand_y = 0.0;
  double hand_vx = 0.0, hand_vy = 0.0;
  GripMode mode = GripMode::firm;
  double stick_angle = 0.0;  // rad, free stick about the pivot, 0 = hanging,
                             // unwrapped so a flip is a crossing of pi
  double stick_rate = 0.0;   // rad/s
  bool flipped = false;      // free stick has passed over the top since release
  double grasp_quality = 0.0;  // frozen at the regrasp instant, 0 before
  double contact = 0.0;        // palm contact proxy, mode dependent
  double wrist_load = 0.0;     // |rod tension| transmitted to the wrist
};

// One control tick: apply the grip command (throws cslearn::Error on a command
// illegal in the current mode), clamp and integrate the hand acceleration,
// advance the free stick, then refresh wrist load and palm contact.
NunchakuState nunchaku_step(const NunchakuState& state, double ax, double ay,
                            GripCommand cmd, double tick,
                            const NunchakuParams& params = {});

// Signed rod tension for the current state and hand acceleration. Positive
// pulls the pivot toward the free stick.
double rod_tension(const NunchakuState& state, double ax, double ay,
                   const NunchakuParams& params = {});

// Catch quality of a regrasp attempted now: near 1 when the stick has flipped
// and arrives slow and aligned, 0 when it never went over the top.
double regrasp_quality(const NunchakuState& state);

// Sensed channel vector [contact, wrist load, hand x, hand y, hand vx,
// hand vy, progress]. Progress is elapsed time over the episode horizon; see
// pendulum_sensed for why the clock channel is normalized.
Eigen::VectorXd nunchaku_sensed(const NunchakuState& state, double progress);

inline constexpr int kNunchakuSensedDim = 7;

}  // namespace cslearn::sim
