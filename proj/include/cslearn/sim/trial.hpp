#pragma once

#include "cslearn/apn.hpp"
#include "cslearn/gpr.hpp"
#include "cslearn/random.hpp"
#include "cslearn/sim/task.hpp"
#include "cslearn/trace.hpp"

#include <map>
#include <string>

namespace cslearn::sim {

struct TrialConfig {
  double budget = 10.0;        // s
  double tick = 1e-3;          // s
  double control_noise = 0.0;  // stddev added per control entry before saturation
};

// Execute the skill on the plant for one episode. Per tick: read the sensed
// state, evaluate the enabled decisions, sample firings, step the marking,
// then run the policy of the active transition through the plant. A stop
// transition firing ends the episode on that tick. Every non-stop transition
// must have a policy with matching dimensions (checked up front); ticks before
// the first firing apply zero control.
trace::Demonstration run_trial(const apn::Net& net,
                               const std::map<std::string, gpr::Model>& policies,
                               Task& task, Rng& rng, const TrialConfig& config = {});

}  // namespace cslearn::sim
