#include "cslearn/sim/trial.hpp"

#include "cslearn/error.hpp"

#include <cmath>

namespace cslearn::sim {

trace::Demonstration run_trial(const apn::Net& net,
                               const std::map<std::string, gpr::Model>& policies,
                               Task& task, Rng& rng, const TrialConfig& config) {
  apn::validate(net);
  const int pd = task.policy_dims();
  for (size_t ti = 0; ti < net.transitions.size(); ++ti) {
    const std::string& id = net.transitions[ti].id;
    if (apn::is_stop_transition(net, static_cast<int>(ti))) continue;
    auto it = policies.find(id);
    if (it == policies.end())
      throw Error("transition '" + id + "' has no control policy");
    if (it->second.input_dim() != pd ||
        it->second.output_dim() != task.control_dim())
      throw Error("policy for '" + id + "' maps " +
                  std::to_string(it->second.input_dim()) + " -> " +
                  std::to_string(it->second.output_dim()) + ", task needs " +
                  std::to_string(pd) + " -> " +
                  std::to_string(task.control_dim()));
  }

  task.reset();
  task.set_horizon(config.budget);
  apn::Marking marking = net.initial_marking;
  const Eigen::VectorXd lambdas = apn::lambda_vector(net);

  trace::Demonstration out;
  out.tick_period = config.tick;
  out.task = task.name();
  out.style = "trial";
  out.noise = config.control_noise;

  int active = -1;
  const long n_ticks = std::lround(config.budget / config.tick);
  for (long i = 0; i < n_ticks; ++i) {
    const double t = i * config.tick;
    const Eigen::VectorXd sensed = task.sensed();

    const std::vector<int> decisions = apn::enabled_decisions(net, marking, sensed);
    const Eigen::VectorXi firing = apn::sample_firing_vector(decisions, lambdas, rng);
    const apn::StepResult step = apn::step_marking(net, marking, firing);
    marking = step.marking;

    int stop = -1;
    for (int ti : step.applied) {
      task.on_transition(net.transitions[ti].id);
      if (apn::is_stop_transition(net, ti)) {
        if (stop < 0) stop = ti;
      } else {
        active = ti;
      }
    }

    if (stop >= 0) {
      out.records.push_back({t, sensed, Eigen::VectorXd::Zero(task.control_dim()),
                             net.transitions[stop].id});
      out.terminal_place = net.places[net.outputs[stop].front()].id;
      break;
    }

    Eigen::VectorXd u = Eigen::VectorXd::Zero(task.control_dim());
    if (active >= 0) u = policies.at(net.transitions[active].id).predict(sensed);
    if (config.control_noise > 0.0)
      for (int k = 0; k < u.size(); ++k)
        u(k) += config.control_noise * rng.gaussian();
    const Eigen::VectorXd applied = task.apply(u, config.tick);
    out.records.push_back(
        {t, sensed, applied, active >= 0 ? net.transitions[active].id : ""});
  }
  return out;
}

}  // namespace cslearn::sim
