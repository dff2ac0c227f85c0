#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cslearn::trace {

struct TickRecord {
  double t = 0.0;
  Eigen::VectorXd sensed;
  Eigen::VectorXd control;
  std::string transition;  // active transition at this tick
};

// One executed episode, demonstration or trial. The transition column holds
// the active (last fired, policy-carrying or terminal) transition per tick;
// a firing is where the column's value starts a new run.
struct Demonstration {
  double tick_period = 1e-3;
  std::string task;
  std::string style;  // oracle style for demos, "trial" for robot trials
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::string terminal_place;  // empty if the time budget ran out first
  std::vector<TickRecord> records;

  int sensed_dim() const;
  int control_dim() const;

  // Transition ids in first-appearance order.
  std::vector<std::string> fired_transitions() const;
  // Sensed state at each transition's first firing tick.
  std::map<std::string, Eigen::VectorXd> first_firing_states() const;
  // Tick indices at which the given transition fired (run starts).
  std::vector<size_t> firing_ticks(const std::string& transition) const;
};

struct LabeledDemonstration {
  std::string demo_id;
  Demonstration trace;
  bool success = false;
  double overall_score = 0.0;
  std::map<std::string, double> per_transition_scores;
};

// CSV with '# key=value' reproducibility header lines, then
// 't,x0..x{d-1},u0..u{c-1},transition'. Floats are shortest round-trip
// decimals, so write(read(file)) is byte-identical.
std::string write_csv(const Demonstration& demo);
Demonstration read_csv(const std::string& content);

void save_csv(const Demonstration& demo, const std::string& path);
Demonstration load_csv(const std::string& path);

// Label file: one line per demo, 'demo_id success(0|1) overall_score
// t<i>:<score> ...'. Demo order is preserved.
struct LabelLine {
  std::string demo_id;
  bool success = false;
  double overall_score = 0.0;
  std::map<std::string, double> per_transition_scores;
};

std::string write_labels(const std::vector<LabelLine>& labels);
std::vector<LabelLine> parse_labels(const std::string& content);

std::vector<LabelLine> to_labels(const std::vector<LabeledDemonstration>& demos);

// Load demos named by a label file: each demo_id maps to <dir>/<demo_id>.csv.
std::vector<LabeledDemonstration> load_labeled_demos(const std::string& dir,
                                                     const std::string& label_path);

}  // namespace cslearn::trace
