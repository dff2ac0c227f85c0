#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cslearn/random.hpp"

namespace cslearn::apn {

enum class ConditionOp { ge, le };

// Linear test on the sensed state: proj . x >= thresh (or <=). The threshold
// is the part adapted from recorded firing states; the projection is fixed
// when the skill is defined.
struct FiringCondition {
  Eigen::VectorXd projection;
  ConditionOp op = ConditionOp::ge;
  double threshold = 0.0;

  bool satisfied(const Eigen::VectorXd& sensed) const;
};

struct Place {
  std::string id;
};

struct Transition {
  std::string id;
  double lambda = 1.0;          // current firing probability, in [0, 1]
  double lambda_initial = 1.0;  // restored when the condition is updated
  std::optional<FiringCondition> condition;  // absent: fires whenever marked
};

using Marking = Eigen::VectorXi;

// Discrete decision layer of a skill. Plain data; the functions below are the
// only mutators and keep the structural invariants (validate()) intact.
struct Net {
  double kappa = 0.9;         // per-failure decay factor for lambda
  double lambda_floor = 0.05; // below this, a condition update is requested
  std::vector<Place> places;
  std::vector<Transition> transitions;
  // Arc lists are the ground truth; the incidence matrix is derived. Using
  // lists keeps self-loops (same place in and out) representable even though
  // their incidence column cancels to zero.
  std::vector<std::vector<int>> inputs;   // per transition: place indices consumed
  std::vector<std::vector<int>> outputs;  // per transition: place indices produced
  Marking initial_marking;

  int place_index(const std::string& id) const;       // -1 if absent
  int transition_index(const std::string& id) const;  // -1 if absent
};

// Structure edits. Each is applied transactionally: the result is validated
// and the edit is rejected (Error) if any invariant would break.
struct AddPlace {
  std::string id;
};
struct DropPlace {
  std::string id;
};
struct AddTransition {
  std::string id;
  double lambda = 1.0;
  std::optional<FiringCondition> condition;
  std::vector<std::string> input_places;   // at least one
  std::vector<std::string> output_places;  // at least one
};
struct DropTransition {
  std::string id;
};
struct AddArc {
  std::string from;  // place id or transition id
  std::string to;
};
struct DropArc {
  std::string from;
  std::string to;
};
using StructureEdit =
    std::variant<AddPlace, DropPlace, AddTransition, DropTransition, AddArc, DropArc>;

struct StepResult {
  Marking marking;
  std::vector<int> applied;     // transitions applied, ascending index
  std::vector<int> suppressed;  // sampled but skipped to keep the marking >= 0
};

// Throws Error if any structural invariant is violated; no-op otherwise.
void validate(const Net& net);

// Places minus inputs plus outputs per transition (P x T). Self-loop arcs
// cancel here, which is why arcs, not this matrix, define the structure.
Eigen::MatrixXi incidence_matrix(const Net& net);

// Transitions whose input places are all marked and whose condition holds on
// the sensed state. Ascending index.
std::vector<int> enabled_decisions(const Net& net, const Marking& marking,
                                   const Eigen::VectorXd& sensed);

// One Bernoulli draw per enabled transition, in ascending index order. Entry i
// of the result is 1 if transition i was enabled and its draw succeeded.
Eigen::VectorXi sample_firing_vector(const std::vector<int>& decisions,
                                     const Eigen::VectorXd& lambdas, Rng& rng);

// Current lambda of every transition, as a vector.
Eigen::VectorXd lambda_vector(const Net& net);

// Apply a sampled firing vector. Transitions are applied in ascending index
// order; one whose input tokens were consumed by an earlier transition in the
// same tick is suppressed instead, so the marking never goes negative.
StepResult step_marking(const Net& net, const Marking& marking, const Eigen::VectorXi& firing);

// lambda <- max(kappa * lambda, lambda_floor). Returns true exactly on the
// call that lands on the floor: the transition has failed often enough that
// its firing condition should be re-estimated. A transition already on the
// floor stays there and returns false.
bool decay(Net& net, int transition);

// Re-estimate the firing threshold from recorded firing states: the threshold
// becomes the projection of the weighted mean state, and lambda is restored to
// its initial value. Weights are normalized to sum 1; they must not all be 0.
void update_condition(Net& net, int transition, const Eigen::MatrixXd& states,
                      const Eigen::VectorXd& weights);

// Apply one structure edit, returning the edited net. Invalid edits throw.
Net mutate_structure(const Net& net, const StructureEdit& edit);

// Text form. parse(serialize(net)) == net, and serialize emits canonical
// bytes: fixed directive order, shortest round-trip numbers, one '\n' per
// line. parse additionally accepts blank lines and '#' comments.
Net parse_net(const std::string& text);
std::string serialize_net(const Net& net);

Net load_net(const std::string& path);

// Places with no outgoing arc. A token there ends the trial.
std::vector<int> terminal_places(const Net& net);

// True if every output place of the transition is terminal. Stop transitions
// carry no control policy; firing one ends the trial.
bool is_stop_transition(const Net& net, int transition);

}  // namespace cslearn::apn
