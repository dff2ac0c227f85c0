#pragma once

#include "cslearn/trace.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cslearn::sim {

struct DemoConfig {
  std::string task = "pendulum";
  std::string style = "bf";
  std::uint64_t seed = 0;
  double control_noise = 0.0;  // stddev added to each mentor control entry
  double tick = 1e-3;
  double budget = 10.0;  // s

  // Capture rig: measured positions arrive framewise, one frame late, and are
  // reconstructed through the dual-rate filter before entering the record.
  long frame_period_ticks = 33;
  long delay_ticks = 33;
  double measurement_noise = 5e-3;  // stddev on filmed positions
};

// Roll out one scripted mentor demonstration, capture it the way the robot
// would sense it, and label the result. The mentor acts on the true plant
// state with its own actuation bounds; only the recording passes through the
// capture rig. Throws on an unknown task or style.
trace::LabeledDemonstration demonstrate(const DemoConfig& config);

// Mentor styles supported for a task, feasible styles first.
std::vector<std::string> demo_styles(const std::string& task);

// The shipped teaching corpus for a task: the styles and seeds the learning
// scenario starts from, labels included.
std::vector<trace::LabeledDemonstration> teaching_corpus(const std::string& task);

}  // namespace cslearn::sim
