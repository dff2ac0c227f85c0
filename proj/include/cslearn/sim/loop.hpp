#pragma once

#include "cslearn/apn.hpp"
#include "cslearn/evaluation.hpp"
#include "cslearn/sim/trial.hpp"
#include "cslearn/trace.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace cslearn::sim {

struct LoopConfig {
  std::string task = "pendulum";
  std::uint64_t seed = 7;
  int trial_budget = 200;   // hard cap on trials
  int window = 10;          // W: success window for termination
  double target_rate = 0.8; // required success rate over the last W trials
  double problem_threshold = 0.4;

  // Policy fitting.
  double cond_ceiling = 1e4;   // diagonal-spread ceiling for subset selection
  int policy_points = 128;     // coverage floor on the selected subset size
  int pool_stride = 10;        // keep every stride-th tick of a policy segment
  double policy_jitter = 1e-3; // noise variance floor for policy fits
  double pseudo_demo_gain = 0.5;  // weight share of a successful trial's data

  // Demonstration down-weighting: per trial, a training point overdriving the
  // actuator is blamed in proportion to its kernel influence on the executed
  // ticks, and each source's weight decays by exp(-blame_rate * mean blame).
  // At 5.0 a consistently blamed source fades over roughly ten trials rather
  // than vanishing before its data has had any say.
  double blame_rate = 5.0;

  int parallel_trials = 1;  // worker threads for speculative trial batches
  TrialConfig trial;

  // Optional progress hook, called after each trial is scored.
  std::function<void(int, const evaluation::TrialEvaluation&)> on_trial;
};

struct AdaptationEvent {
  int trial = 0;
  std::string target;  // transition id, or source id for down-weighting
  std::string kind;    // "decay" | "condition_update" | "down_weight"
  double value = 0.0;  // lambda after / new threshold / blame mass
};

struct PolicyInfo {
  int pool_points = 0;  // accumulated segment ticks
  int fit_points = 0;   // subset actually fitted
};

struct LearnReport {
  std::string task;
  std::uint64_t seed = 0;
  int trials = 0;
  std::string termination;  // "learned" | "budget_exhausted"
  double first_window_rate = 0.0;
  double last_window_rate = 0.0;
  std::vector<double> scores;     // self-assessed overall score per trial
  std::vector<char> verdicts;     // 1 = judged success
  std::vector<AdaptationEvent> events;
  std::map<std::string, PolicyInfo> policies;
  std::map<std::string, double> source_weights;  // final weight per source
  std::map<std::string, std::string> source_styles;
  std::string final_net;  // canonical text of the adapted net

  std::string to_json(int indent = 2) const;
};

// Trial-and-adapt cycle: fit scoring criteria and policies from the labeled
// demos, then repeat trials. A failed trial decays the problematic and stalled
// transitions; a lambda crossing its floor re-estimates that transition's
// threshold from the recorded firing states (once per trial each). A
// successful trial feeds its data back as a pseudo-demonstration. Actuator
// overdrive in the executed policies shifts weight away from the demos that
// demanded it. Stops when the last `window` trials reach `target_rate`, or
// the budget runs out.
LearnReport composite_learning_loop(const LoopConfig& config, const apn::Net& initial,
                                    const std::vector<trace::LabeledDemonstration>& demos);

struct PolicySnapshot {
  gpr::Model model;
  int pool_points = 0;     // segment ticks pooled across demos
  int fit_points = 0;      // subset actually fitted
  double diag_spread = 1.0;  // pivoted-diagonal spread witness of the subset
};

// The loop's pre-trial policy fit as a standalone step: pool segments from the
// positively weighted demos, select a well-conditioned subset per transition,
// and fit weighted GP policies. Uses task/policy fields of `config` only.
std::map<std::string, PolicySnapshot> fit_policies(
    const std::vector<trace::LabeledDemonstration>& demos, const apn::Net& net,
    const LoopConfig& config);

}  // namespace cslearn::sim
