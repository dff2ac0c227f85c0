#include "cslearn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "cslearn/error.hpp"
#include "cslearn/snapshot.hpp"

namespace cslearn::evaluation {

namespace {

constexpr std::uint32_t kCriteriaMagic = 0x53524349u;  // "ICRS"
constexpr std::uint32_t kCriteriaVersion = 1;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Noise floor for score regressors: handfuls of demos, so near-interpolation
// is the right regime.
constexpr double kScoreJitter = 1e-6;

// Score regressors keep a zero prior: a trial whose features resemble no
// demonstration earns a score near zero, not near the average demo. With the
// weighted-mean prior an off-distribution failure would inherit the corpus
// average and could be misread as a success.
gpr::Model fit_score_model(const Eigen::MatrixXd& features, const Eigen::VectorXd& scores) {
  gpr::TrainingSet ts;
  ts.states = features;
  ts.controls = scores.transpose();
  if (features.cols() >= 3) {
    return gpr::Model::fit(std::move(ts), std::nullopt, kScoreJitter, false);
  }
  // Too few points for likelihood selection: scale the kernel to the data.
  double spread = 0.0;
  for (Eigen::Index i = 0; i < features.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < features.cols(); ++j) {
      spread = std::max(spread, (features.col(i) - features.col(j)).norm());
    }
  }
  gpr::Hyperparams theta{1.0, spread > 0.0 ? spread : 1.0};
  return gpr::Model::fit(std::move(ts), theta, kScoreJitter, false);
}

}  // namespace

TraceFeatures extract_features(const trace::Demonstration& demo, const apn::Net& net) {
  if (demo.records.empty()) throw Error("cannot extract features from an empty trace");
  std::vector<std::string> fired = demo.fired_transitions();
  if (fired.empty()) throw Error("trace has no fired transitions");

  TraceFeatures out;
  double tick = demo.tick_period;
  for (const std::string& id : fired) {
    double duration = 0.0;
    double peak = 0.0;
    double integral = 0.0;
    const trace::TickRecord* last = nullptr;
    for (const trace::TickRecord& r : demo.records) {
      if (r.transition != id) continue;
      duration += tick;
      double u = r.control.norm();
      peak = std::max(peak, u);
      integral += u * tick;
      last = &r;
    }
    Eigen::VectorXd f(kFeatureDim);
    f(0) = duration;
    f(1) = last->sensed.norm();
    f(2) = peak;
    f(3) = integral;
    f(4) = 0.0;
    int t = net.transition_index(id);
    if (t >= 0 && net.transitions[t].condition) {
      const apn::FiringCondition& c = *net.transitions[t].condition;
      if (c.projection.size() != last->sensed.size()) {
        throw Error("condition dimension does not match the trace's sensed state");
      }
      f(4) = std::abs(c.projection.dot(last->sensed) - c.threshold);
    }
    out.per_transition.emplace(id, std::move(f));
  }

  double peak = 0.0, integral = 0.0;
  for (const trace::TickRecord& r : demo.records) {
    double u = r.control.norm();
    peak = std::max(peak, u);
    integral += u * tick;
  }
  double dev_sum = 0.0;
  int dev_count = 0;
  for (const auto& [id, f] : out.per_transition) {
    int t = net.transition_index(id);
    if (t >= 0 && net.transitions[t].condition) {
      dev_sum += f(4);
      ++dev_count;
    }
  }
  Eigen::VectorXd overall(kFeatureDim);
  overall(0) = static_cast<double>(demo.records.size()) * tick;
  overall(1) = demo.records.back().sensed.norm();
  overall(2) = peak;
  overall(3) = integral;
  overall(4) = dev_count ? dev_sum / dev_count : 0.0;
  out.overall = std::move(overall);
  return out;
}

ScoringCriteria learn_criteria(const std::vector<trace::LabeledDemonstration>& demos,
                               const apn::Net& net, double problem_threshold) {
  if (demos.size() < 2) throw Error("criteria need at least 2 labeled demos");
  bool any_success = false, any_failure = false;
  for (const auto& d : demos) (d.success ? any_success : any_failure) = true;

  std::vector<TraceFeatures> features;
  features.reserve(demos.size());
  for (const auto& d : demos) features.push_back(extract_features(d.trace, net));

  ScoringCriteria criteria;
  criteria.problem_threshold = problem_threshold;

  // Per-transition regressors over every demo that labeled that transition.
  std::map<std::string, std::vector<std::pair<Eigen::VectorXd, double>>> pools;
  for (size_t i = 0; i < demos.size(); ++i) {
    for (const auto& [id, score] : demos[i].per_transition_scores) {
      auto it = features[i].per_transition.find(id);
      if (it == features[i].per_transition.end()) {
        throw Error("demo '" + demos[i].demo_id + "' scores transition '" + id +
                    "' which never fired in its trace");
      }
      pools[id].push_back({it->second, score});
    }
  }
  for (auto& [id, pool] : pools) {
    Eigen::MatrixXd x(kFeatureDim, static_cast<Eigen::Index>(pool.size()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(pool.size()));
    for (size_t i = 0; i < pool.size(); ++i) {
      x.col(static_cast<Eigen::Index>(i)) = pool[i].first;
      y(static_cast<Eigen::Index>(i)) = pool[i].second;
    }
    criteria.per_transition.emplace(id, fit_score_model(x, y));
  }

  Eigen::MatrixXd x(kFeatureDim, static_cast<Eigen::Index>(demos.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(demos.size()));
  for (size_t i = 0; i < demos.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = features[i].overall;
    y(static_cast<Eigen::Index>(i)) = demos[i].overall_score;
  }
  criteria.overall = fit_score_model(x, y);

  if (any_success && any_failure) {
    double lowest_success = 1.0, highest_failure = 0.0;
    for (size_t i = 0; i < demos.size(); ++i) {
      double pred = clamp01(criteria.overall.predict(features[i].overall)(0));
      if (demos[i].success) {
        lowest_success = std::min(lowest_success, pred);
      } else {
        highest_failure = std::max(highest_failure, pred);
      }
    }
    criteria.success_threshold = 0.5 * (lowest_success + highest_failure);
  } else {
    criteria.success_threshold = 0.5;
    std::cerr << "warning: all demos share one label; success threshold defaults to 0.5\n";
  }
  return criteria;
}

TrialEvaluation score_trial(const ScoringCriteria& criteria, const trace::Demonstration& demo,
                            const apn::Net& net) {
  if (criteria.overall.empty()) throw Error("criteria are not trained");
  if (demo.fired_transitions().empty()) {
    // Nothing fired, nothing to grade per transition; the episode is a
    // failure by definition.
    TrialEvaluation eval;
    eval.overall = 0.0;
    eval.verdict = false;
    return eval;
  }
  TraceFeatures features = extract_features(demo, net);
  if (criteria.overall.input_dim() != features.overall.size()) {
    throw Error("criteria feature dimension does not match this net");
  }

  TrialEvaluation eval;
  for (const auto& [id, f] : features.per_transition) {
    auto it = criteria.per_transition.find(id);
    eval.per_transition[id] = it == criteria.per_transition.end()
                                  ? 0.5
                                  : clamp01(it->second.predict(f)(0));
  }
  eval.overall = clamp01(criteria.overall.predict(features.overall)(0));
  eval.verdict = eval.overall >= criteria.success_threshold;

  std::vector<std::pair<int, std::string>> flagged;
  for (const auto& [id, score] : eval.per_transition) {
    if (score < criteria.problem_threshold) {
      int t = net.transition_index(id);
      flagged.push_back({t >= 0 ? t : static_cast<int>(net.transitions.size()), id});
    }
  }
  std::sort(flagged.begin(), flagged.end());
  for (auto& [idx, id] : flagged) eval.problematic.push_back(id);
  return eval;
}

std::vector<std::string> locate_problematic(const TrialEvaluation& evaluation) {
  return evaluation.problematic;
}

std::vector<double> demo_weights(const std::vector<trace::LabeledDemonstration>& demos) {
  if (demos.empty()) throw Error("no demos to weight");
  std::vector<double> weights(demos.size(), 0.0);
  double total = 0.0;
  for (size_t i = 0; i < demos.size(); ++i) {
    if (!demos[i].success) continue;
    if (demos[i].overall_score < 0.0) throw Error("negative overall score");
    weights[i] = demos[i].overall_score;
    total += weights[i];
  }
  if (!(total > 0.0)) throw Error("no successful demo with a positive score");
  for (double& w : weights) w /= total;
  return weights;
}

void ScoringCriteria::save(std::ostream& out) const {
  snapshot::write_header(out, kCriteriaMagic, kCriteriaVersion);
  snapshot::write_f64(out, success_threshold);
  snapshot::write_f64(out, problem_threshold);
  snapshot::write_u64(out, per_transition.size());
  for (const auto& [id, model] : per_transition) {
    snapshot::write_string(out, id);
    model.save(out);
  }
  overall.save(out);
}

ScoringCriteria ScoringCriteria::load(std::istream& in) {
  snapshot::expect_header(in, kCriteriaMagic, kCriteriaVersion, "criteria");
  ScoringCriteria c;
  c.success_threshold = snapshot::read_f64(in);
  c.problem_threshold = snapshot::read_f64(in);
  std::uint64_t n = snapshot::read_u64(in);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string id = snapshot::read_string(in);
    c.per_transition.emplace(id, gpr::Model::load(in));
  }
  c.overall = gpr::Model::load(in);
  return c;
}

}  // namespace cslearn::evaluation
