#include "cslearn/sim/task.hpp"

#include "cslearn/error.hpp"

#include <cmath>

namespace cslearn::sim {

namespace {
const std::string kPendulumName = "pendulum";
const std::string kNunchakuName = "nunchaku";

void check_control(const Eigen::VectorXd& control, int dim, const std::string& task) {
  if (control.size() != dim)
    throw Error(task + " control has " + std::to_string(control.size()) +
                " entries, expected " + std::to_string(dim));
}
}  // namespace

PendulumTask::PendulumTask(PendulumParams params) : params_(params) {}

const std::string& PendulumTask::name() const { return kPendulumName; }

void PendulumTask::reset() {
  state_ = PendulumState{};
  time_ = 0.0;
}

Eigen::VectorXd PendulumTask::sensed() const {
  return pendulum_sensed(state_.angle, state_.velocity, time_ / horizon_, params_);
}

Eigen::VectorXd PendulumTask::apply(const Eigen::VectorXd& control, double tick) {
  check_control(control, 1, kPendulumName);
  state_ = pendulum_step(state_, control(0), tick, params_);
  time_ += tick;
  return Eigen::VectorXd::Constant(1, state_.torque);
}

void PendulumTask::on_transition(const std::string&) {}

bool PendulumTask::succeeded() const {
  return pendulum_upright(state_.angle, state_.velocity);
}

std::vector<double> PendulumTask::measured_positions() const {
  return {state_.angle};
}

Eigen::VectorXd PendulumTask::sensed_from_estimates(
    const std::vector<double>& positions, const std::vector<double>& velocities,
    double t_now) const {
  if (positions.size() != 1 || velocities.size() != 1)
    throw Error("pendulum capture expects one position channel");
  return pendulum_sensed(positions[0], velocities[0], t_now / horizon_, params_);
}

NunchakuTask::NunchakuTask(NunchakuParams params)
    : params_(params),
      bindings_{{"t2", GripCommand::release},
                {"t3", GripCommand::back_palm},
                {"t4", GripCommand::regrasp}} {}

const std::string& NunchakuTask::name() const { return kNunchakuName; }

void NunchakuTask::reset() {
  state_ = NunchakuState{};
  time_ = 0.0;
  pending_ = GripCommand::none;
}

Eigen::VectorXd NunchakuTask::sensed() const {
  return nunchaku_sensed(state_, time_ / horizon_);
}

Eigen::VectorXd NunchakuTask::apply(const Eigen::VectorXd& control, double tick) {
  check_control(control, 2, kNunchakuName);
  const GripCommand cmd = pending_;
  pending_ = GripCommand::none;
  state_ = nunchaku_step(state_, control(0), control(1), cmd, tick, params_);
  time_ += tick;
  Eigen::VectorXd applied(2);
  applied << std::clamp(control(0), -params_.accel_limit, params_.accel_limit),
      std::clamp(control(1), -params_.accel_limit, params_.accel_limit);
  return applied;
}

void NunchakuTask::on_transition(const std::string& id) {
  auto it = bindings_.find(id);
  if (it == bindings_.end()) return;
  // Only the firing that matches the current phase acts; a contact self-loop
  // re-firing in back-palm phase carries no new command.
  switch (it->second) {
    case GripCommand::release:
      if (state_.mode == GripMode::firm) pending_ = GripCommand::release;
      break;
    case GripCommand::back_palm:
      if (state_.mode == GripMode::released) pending_ = GripCommand::back_palm;
      break;
    case GripCommand::regrasp:
      if (state_.mode == GripMode::back_palm) pending_ = GripCommand::regrasp;
      break;
    case GripCommand::none:
      break;
  }
}

bool NunchakuTask::succeeded() const {
  return state_.mode == GripMode::regrasped && state_.grasp_quality >= 0.5;
}

std::vector<double> NunchakuTask::measured_positions() const {
  return {state_.hand_x, state_.hand_y};
}

Eigen::VectorXd NunchakuTask::sensed_from_estimates(
    const std::vector<double>& positions, const std::vector<double>& velocities,
    double t_now) const {
  if (positions.size() != 2 || velocities.size() != 2)
    throw Error("nunchaku capture expects two position channels");
  Eigen::VectorXd out(kNunchakuSensedDim);
  out << state_.contact, state_.wrist_load, positions[0], positions[1],
      velocities[0], velocities[1], t_now / horizon_;
  return out;
}

std::unique_ptr<Task> make_task(const std::string& id) {
  if (id == kPendulumName) return std::make_unique<PendulumTask>();
  if (id == kNunchakuName) return std::make_unique<NunchakuTask>();
  throw Error("unknown task '" + id + "' (expected pendulum or nunchaku)");
}

}  // namespace cslearn::sim
