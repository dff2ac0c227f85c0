#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cslearn/apn.hpp"
#include "cslearn/gpr.hpp"
#include "cslearn/trace.hpp"

namespace cslearn::evaluation {

// Per-transition descriptors of an episode, each a fixed 5-entry vector:
//   [0] total active duration (s)
//   [1] norm of the sensed state when the transition's last segment ends
//   [2] peak control norm while active
//   [3] time integral of the control norm while active
//   [4] |proj . x_end - threshold| against the transition's own firing
//       condition, 0 for unconditioned transitions
struct TraceFeatures {
  std::map<std::string, Eigen::VectorXd> per_transition;
  Eigen::VectorXd overall;  // same layout aggregated over the whole episode;
                            // entry 4 averages over fired conditioned transitions
};

inline constexpr int kFeatureDim = 5;

TraceFeatures extract_features(const trace::Demonstration& trace, const apn::Net& net);

// Score regressors learned from mentor-labeled demonstrations plus the
// success threshold calibrated from them.
struct ScoringCriteria {
  std::map<std::string, gpr::Model> per_transition;
  gpr::Model overall;
  double success_threshold = 0.5;   // tau
  double problem_threshold = 0.4;

  void save(std::ostream& out) const;
  static ScoringCriteria load(std::istream& in);
};

struct TrialEvaluation {
  double overall = 0.0;
  std::map<std::string, double> per_transition;
  bool verdict = false;
  std::vector<std::string> problematic;  // ascending net index
};

// Fit score regressors on the labeled demos and calibrate tau midway between
// the lowest successful and highest failed predicted overall scores. With
// only one label class tau falls back to 0.5 and a warning goes to stderr.
ScoringCriteria learn_criteria(const std::vector<trace::LabeledDemonstration>& demos,
                               const apn::Net& net, double problem_threshold = 0.4);

// Self-evaluation of one episode. Fired transitions without a learned
// regressor (never scored in any demo) get a neutral 0.5 so novel paths are
// judged by the stall logic, not auto-flagged.
TrialEvaluation score_trial(const ScoringCriteria& criteria, const trace::Demonstration& trace,
                            const apn::Net& net);

std::vector<std::string> locate_problematic(const TrialEvaluation& evaluation);

// Policy-regression weight per demo, aligned with the input order: failures
// get exactly 0, successes are proportional to overall_score and normalized
// to sum 1.
std::vector<double> demo_weights(const std::vector<trace::LabeledDemonstration>& demos);

}  // namespace cslearn::evaluation
