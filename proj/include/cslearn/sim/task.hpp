#pragma once

#include "cslearn/sim/nunchaku.hpp"
#include "cslearn/sim/pendulum.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace cslearn::sim {

// A controllable plant with the hooks the learning stack needs: continuous
// control at a fixed tick, discrete side effects bound to transition firings,
// and the measured channels a demonstration capture rig would film.
class Task {
 public:
  virtual ~Task() = default;

  virtual const std::string& name() const = 0;
  virtual int sensed_dim() const = 0;
  virtual int control_dim() const = 0;
  // Per-entry saturation bound of the plant's own actuation.
  virtual double control_limit() const = 0;

  virtual void reset() = 0;
  virtual double time() const = 0;

  // Episode length in seconds that the sensed progress channel is normalized
  // by. Callers running a bounded episode should set this to their budget.
  void set_horizon(double seconds) { horizon_ = seconds; }
  double horizon() const { return horizon_; }

  // Sensed channel vector at the current state, progress channel included.
  virtual Eigen::VectorXd sensed() const = 0;

  // Leading sensed channels the control policies read. The trailing progress
  // channel is schedule bookkeeping for the net's conditions; feeding it to a
  // policy would make physically identical states look novel to the regressor
  // whenever a trial runs off the demonstrations' timetable.
  int policy_dims() const { return sensed_dim() - 1; }

  // Advance one tick under the given control. Saturation is applied inside;
  // the control actually applied is returned.
  virtual Eigen::VectorXd apply(const Eigen::VectorXd& control, double tick) = 0;

  // Discrete effect of a transition firing, if the task binds one to this id.
  // Re-fired bindings whose phase change already happened are ignored.
  virtual void on_transition(const std::string& id) = 0;

  // Ground-truth goal test on the current state.
  virtual bool succeeded() const = 0;

  // Position channels a capture rig measures, for filtered reconstruction.
  virtual std::vector<double> measured_positions() const = 0;

  // Sensed vector rebuilt from filtered position and velocity estimates of the
  // measured channels. Channels no rig can estimate are taken from the plant.
  virtual Eigen::VectorXd sensed_from_estimates(const std::vector<double>& positions,
                                                const std::vector<double>& velocities,
                                                double t_now) const = 0;

 protected:
  double horizon_ = 10.0;
};

class PendulumTask final : public Task {
 public:
  explicit PendulumTask(PendulumParams params = {});

  const std::string& name() const override;
  int sensed_dim() const override { return kPendulumSensedDim; }
  int control_dim() const override { return 1; }
  double control_limit() const override { return params_.torque_limit; }

  void reset() override;
  double time() const override { return time_; }
  Eigen::VectorXd sensed() const override;
  Eigen::VectorXd apply(const Eigen::VectorXd& control, double tick) override;
  void on_transition(const std::string& id) override;
  bool succeeded() const override;
  std::vector<double> measured_positions() const override;
  Eigen::VectorXd sensed_from_estimates(const std::vector<double>& positions,
                                        const std::vector<double>& velocities,
                                        double t_now) const override;

  const PendulumState& state() const { return state_; }
  const PendulumParams& params() const { return params_; }

 private:
  PendulumParams params_;
  PendulumState state_;
  double time_ = 0.0;
};

class NunchakuTask final : public Task {
 public:
  explicit NunchakuTask(NunchakuParams params = {});

  const std::string& name() const override;
  int sensed_dim() const override { return kNunchakuSensedDim; }
  int control_dim() const override { return 2; }
  double control_limit() const override { return params_.accel_limit; }

  void reset() override;
  double time() const override { return time_; }
  Eigen::VectorXd sensed() const override;
  Eigen::VectorXd apply(const Eigen::VectorXd& control, double tick) override;
  void on_transition(const std::string& id) override;
  bool succeeded() const override;
  std::vector<double> measured_positions() const override;
  Eigen::VectorXd sensed_from_estimates(const std::vector<double>& positions,
                                        const std::vector<double>& velocities,
                                        double t_now) const override;

  const NunchakuState& state() const { return state_; }
  const NunchakuParams& params() const { return params_; }

 private:
  NunchakuParams params_;
  NunchakuState state_;
  double time_ = 0.0;
  GripCommand pending_ = GripCommand::none;
  // Grip phase changes keyed by the transitions of the shipped flip net.
  std::map<std::string, GripCommand> bindings_;
};

// Robot-grade task by name ("pendulum" or "nunchaku"). Throws on anything else.
std::unique_ptr<Task> make_task(const std::string& id);

}  // namespace cslearn::sim
