#include "cslearn/sim/loop.hpp"

#include "cslearn/conditioning.hpp"
#include "cslearn/error.hpp"
#include "cslearn/sim/task.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <thread>

namespace cslearn::sim {
namespace {

// Weights never reach exact zero inside a fit: a crushed source keeps a trace
// weight so its diagonal jitter blows up instead of dividing by zero.
constexpr double kWeightFloor = 1e-8;

// Below this weight a source's points are left out of subset selection; a
// crushed source would otherwise keep holding coverage slots with points the
// fit can no longer hear.
constexpr double kLiveWeight = 1e-6;

struct Source {
  std::string id;
  std::string style;
  double weight = 0.0;
};

struct PoolPoint {
  Eigen::VectorXd state;
  Eigen::VectorXd control;
  int source = 0;
};

// Per-transition policy training data, grown demo by demo and trial by trial.
struct Pool {
  std::vector<PoolPoint> points;
  bool dirty = true;                      // subset selection must rerun
  std::vector<int> live;                  // sources live at the last selection
  std::vector<int> chosen;                // indices into points
  std::optional<gpr::Hyperparams> theta;  // frozen at the first fit
  std::vector<double> overdrive;          // per chosen point: (|u|/limit - 1)+
};

struct BankEntry {
  Eigen::VectorXd state;
  int source = 0;
};

void renormalize(std::vector<Source>& sources) {
  double sum = 0.0;
  for (const Source& s : sources)
    if (s.weight > 0.0) sum += s.weight;
  if (sum <= 0.0) return;
  for (Source& s : sources)
    if (s.weight > 0.0) s.weight /= sum;
}

// Pull policy segments out of an episode: for every non-stop transition run,
// keep the run's first tick and every stride-th tick after it.
void harvest_segments(const trace::Demonstration& episode, const apn::Net& net,
                      int source, int stride,
                      std::map<std::string, Pool>& pools) {
  std::string prev;
  long run_pos = 0;
  for (const auto& rec : episode.records) {
    const std::string& id = rec.transition;
    if (id != prev) run_pos = 0;
    prev = id;
    if (id.empty()) continue;
    const int ti = net.transition_index(id);
    if (ti < 0 || apn::is_stop_transition(net, ti)) continue;
    if (run_pos % stride == 0) {
      Pool& pool = pools[id];
      pool.points.push_back({rec.sensed, rec.control, source});
      pool.dirty = true;
    }
    ++run_pos;
  }
}

// Record the sensed state at every firing (run start) for threshold updates.
void harvest_bank(const trace::Demonstration& episode, int source,
                  std::map<std::string, std::vector<BankEntry>>& bank) {
  for (const auto& id : episode.fired_transitions())
    for (size_t tick : episode.firing_ticks(id))
      bank[id].push_back({episode.records[tick].sensed, source});
}

gpr::Hyperparams fallback_theta(const Pool& pool) {
  double spread = 0.0;
  for (size_t i = 0; i < pool.points.size(); ++i)
    for (size_t j = i + 1; j < pool.points.size(); ++j)
      spread = std::max(spread,
                        (pool.points[i].state - pool.points[j].state).norm());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(pool.points[0].control.size());
  for (const auto& p : pool.points) mean += p.control;
  mean /= static_cast<double>(pool.points.size());
  double dev = 0.0;
  for (const auto& p : pool.points)
    dev = std::max(dev, (p.control - mean).norm());
  return {dev > 1e-9 ? dev : 1.0, spread > 1e-9 ? spread : 1.0};
}

gpr::Model fit_pool(Pool& pool, const std::vector<Source>& sources,
                    const LoopConfig& cfg, double control_limit) {
  const int d = static_cast<int>(pool.points[0].state.size());

  // Selection candidates: points whose source can still be heard. When a
  // source dies the selection reruns so its slots go back to live coverage.
  std::vector<int> live;
  live.reserve(pool.points.size());
  for (size_t i = 0; i < pool.points.size(); ++i)
    if (sources[pool.points[i].source].weight >= kLiveWeight)
      live.push_back(static_cast<int>(i));
  if (live.empty())
    for (size_t i = 0; i < pool.points.size(); ++i)
      live.push_back(static_cast<int>(i));
  if (live != pool.live) pool.dirty = true;

  if (pool.dirty) {
    const int n = static_cast<int>(live.size());
    if (n <= cfg.policy_points) {
      pool.chosen = live;
    } else {
      Eigen::MatrixXd stack(d, n);
      for (int i = 0; i < n; ++i) stack.col(i) = pool.points[live[i]].state;
      const int k = conditioning::choose_subset_size(stack, cfg.cond_ceiling);
      const int m = std::min(n, std::max(k, cfg.policy_points));
      if (m >= n) {
        pool.chosen = live;
      } else {
        pool.chosen.clear();
        for (int i : conditioning::select_indices(stack, m))
          pool.chosen.push_back(live[i]);
      }
    }
    pool.overdrive.resize(pool.chosen.size());
    for (size_t i = 0; i < pool.chosen.size(); ++i) {
      const Eigen::VectorXd& u = pool.points[pool.chosen[i]].control;
      pool.overdrive[i] =
          std::max(0.0, u.cwiseAbs().maxCoeff() / control_limit - 1.0);
    }
    pool.live = std::move(live);
    pool.dirty = false;
  }

  const int m = static_cast<int>(pool.chosen.size());
  gpr::TrainingSet ts;
  ts.states.resize(d, m);
  ts.controls.resize(pool.points[0].control.size(), m);
  ts.point_weights.resize(m);
  for (int i = 0; i < m; ++i) {
    const PoolPoint& p = pool.points[pool.chosen[i]];
    ts.states.col(i) = p.state;
    ts.controls.col(i) = p.control;
    ts.point_weights(i) = std::max(sources[p.source].weight, kWeightFloor);
  }

  std::optional<gpr::Hyperparams> theta = pool.theta;
  if (!theta && m < 3) theta = fallback_theta(pool);
  gpr::Model model = gpr::Model::fit(std::move(ts), theta, cfg.policy_jitter);
  if (!pool.theta) pool.theta = model.theta();
  return model;
}

}  // namespace

std::map<std::string, PolicySnapshot> fit_policies(
    const std::vector<trace::LabeledDemonstration>& demos, const apn::Net& net,
    const LoopConfig& cfg) {
  apn::validate(net);

  std::vector<Source> sources;
  const std::vector<double> weights = evaluation::demo_weights(demos);
  for (size_t i = 0; i < demos.size(); ++i)
    sources.push_back({demos[i].demo_id, demos[i].trace.style, weights[i]});

  std::map<std::string, Pool> pools;
  for (size_t i = 0; i < demos.size(); ++i)
    if (sources[i].weight > 0.0)
      harvest_segments(demos[i].trace, net, static_cast<int>(i),
                       cfg.pool_stride, pools);
  if (pools.empty()) throw Error("no policy data in the successful demos");

  const double control_limit = make_task(cfg.task)->control_limit();
  std::map<std::string, PolicySnapshot> out;
  for (auto& [id, pool] : pools) {
    PolicySnapshot snap;
    snap.model = fit_pool(pool, sources, cfg, control_limit);
    snap.pool_points = static_cast<int>(pool.points.size());
    snap.fit_points = static_cast<int>(pool.chosen.size());
    Eigen::MatrixXd stack(pool.points[0].state.size(), snap.pool_points);
    for (int i = 0; i < snap.pool_points; ++i) stack.col(i) = pool.points[i].state;
    snap.diag_spread = conditioning::diag_spread(stack, snap.fit_points);
    out.emplace(id, std::move(snap));
  }
  return out;
}

LearnReport composite_learning_loop(
    const LoopConfig& cfg, const apn::Net& initial,
    const std::vector<trace::LabeledDemonstration>& demos) {
  apn::validate(initial);
  if (cfg.trial_budget < 1) throw Error("trial budget must be at least 1");
  if (cfg.window < 1) throw Error("success window must be at least 1");

  apn::Net net = initial;  // adapted in place
  const apn::Net& scoring_net = initial;  // criteria stay in the initial frame

  const evaluation::ScoringCriteria criteria =
      evaluation::learn_criteria(demos, scoring_net, cfg.problem_threshold);

  std::vector<Source> sources;
  const std::vector<double> weights0 = evaluation::demo_weights(demos);
  for (size_t i = 0; i < demos.size(); ++i)
    sources.push_back({demos[i].demo_id, demos[i].trace.style, weights0[i]});

  std::map<std::string, Pool> pools;
  std::map<std::string, std::vector<BankEntry>> bank;
  for (size_t i = 0; i < demos.size(); ++i) {
    if (sources[i].weight > 0.0)
      harvest_segments(demos[i].trace, net, static_cast<int>(i),
                       cfg.pool_stride, pools);
    harvest_bank(demos[i].trace, static_cast<int>(i), bank);
  }
  if (pools.empty()) throw Error("no policy data in the successful demos");

  const double control_limit = make_task(cfg.task)->control_limit();
  std::map<std::string, gpr::Model> policies;
  for (auto& [id, pool] : pools)
    policies[id] = fit_pool(pool, sources, cfg, control_limit);

  LearnReport report;
  report.task = cfg.task;
  report.seed = cfg.seed;

  bool done = false;
  int k = 0;
  const int batch_cap = std::max(1, cfg.parallel_trials);
  while (!done && k < cfg.trial_budget) {
    // Speculative batch: run ahead under the frozen state; results after a
    // state change are stale and get discarded, so the outcome is the same
    // as running strictly one at a time.
    const int batch = std::min(batch_cap, cfg.trial_budget - k);
    std::vector<trace::Demonstration> runs(batch);
    std::vector<std::string> failures(batch);
    auto worker = [&](int b) {
      try {
        auto task = make_task(cfg.task);
        Rng rng = Rng::substream(cfg.seed, static_cast<std::uint64_t>(k + b));
        runs[b] = run_trial(net, policies, *task, rng, cfg.trial);
        runs[b].seed = static_cast<std::uint64_t>(k + b);
      } catch (const std::exception& e) {
        failures[b] = e.what();
      }
    };
    if (batch == 1) {
      worker(0);
    } else {
      std::vector<std::thread> crew;
      crew.reserve(batch);
      for (int b = 0; b < batch; ++b) crew.emplace_back(worker, b);
      for (auto& t : crew) t.join();
    }

    for (int b = 0; b < batch && !done; ++b) {
      if (!failures[b].empty()) throw Error("trial " + std::to_string(k) +
                                            " failed: " + failures[b]);
      const trace::Demonstration& trial = runs[b];
      const evaluation::TrialEvaluation eval =
          evaluation::score_trial(criteria, trial, scoring_net);

      report.scores.push_back(eval.overall);
      report.verdicts.push_back(eval.verdict ? 1 : 0);
      if (cfg.on_trial) cfg.on_trial(k, eval);

      bool changed = false;

      // Blame pass: kernel influence of overdriving training points on the
      // ticks actually executed, averaged over the episode.
      {
        std::map<int, double> blame;
        for (const auto& rec : trial.records) {
          if (rec.transition.empty()) continue;
          auto pit = pools.find(rec.transition);
          if (pit == pools.end()) continue;
          const Pool& pool = pit->second;
          const gpr::Model& model = policies.at(rec.transition);
          const Eigen::RowVectorXd kvec = model.kernel_row(rec.sensed);
          const double sum = kvec.sum();
          if (!(sum > 1e-300)) continue;
          for (size_t p = 0; p < pool.chosen.size(); ++p)
            if (pool.overdrive[p] > 0.0)
              blame[pool.points[pool.chosen[p]].source] +=
                  kvec(static_cast<int>(p)) / sum * pool.overdrive[p];
        }
        bool weights_moved = false;
        for (const auto& [src, mass] : blame) {
          const double mean_blame = mass / static_cast<double>(trial.records.size());
          if (mean_blame <= 0.0) continue;
          sources[src].weight *= std::exp(-cfg.blame_rate * mean_blame);
          weights_moved = true;
          report.events.push_back(
              {k, sources[src].id, "down_weight", mean_blame});
        }
        if (weights_moved) {
          renormalize(sources);
          changed = true;
        }
      }

      if (eval.verdict) {
        // Feed the successful episode back as a pseudo-demonstration.
        const double w = cfg.pseudo_demo_gain * eval.overall;
        if (w > 0.0) {
          const int src = static_cast<int>(sources.size());
          sources.push_back({"trial-" + std::to_string(k), "trial", w});
          renormalize(sources);
          harvest_segments(trial, net, src, cfg.pool_stride, pools);
          harvest_bank(trial, src, bank);
          changed = true;
        }
      } else {
        // Decay the transitions implicated in the failure: scored below the
        // problem threshold, or never fired out of the place the episode
        // died in.
        std::set<std::string> flagged(eval.problematic.begin(),
                                      eval.problematic.end());
        if (!trial.terminal_place.empty() && !trial.records.empty()) {
          const int stop = net.transition_index(trial.records.back().transition);
          if (stop >= 0) {
            std::set<std::string> fired;
            for (const auto& id : trial.fired_transitions()) fired.insert(id);
            for (int place : net.inputs[stop])
              for (size_t ti = 0; ti < net.transitions.size(); ++ti) {
                if (static_cast<int>(ti) == stop) continue;
                const auto& ins = net.inputs[ti];
                if (std::find(ins.begin(), ins.end(), place) == ins.end())
                  continue;
                if (!fired.count(net.transitions[ti].id))
                  flagged.insert(net.transitions[ti].id);
              }
          }
        }
        std::vector<int> order;
        for (const auto& id : flagged) {
          const int ti = net.transition_index(id);
          if (ti >= 0) order.push_back(ti);
        }
        std::sort(order.begin(), order.end());

        std::set<int> updated_this_trial;
        for (int ti : order) {
          const bool floor_hit = apn::decay(net, ti);
          changed = true;
          report.events.push_back({k, net.transitions[ti].id, "decay",
                                   net.transitions[ti].lambda});
          if (!floor_hit || !net.transitions[ti].condition ||
              updated_this_trial.count(ti))
            continue;
          auto bit = bank.find(net.transitions[ti].id);
          if (bit == bank.end()) continue;
          const auto& entries = bit->second;
          Eigen::MatrixXd states(entries[0].state.size(), entries.size());
          Eigen::VectorXd w(entries.size());
          for (size_t e = 0; e < entries.size(); ++e) {
            states.col(static_cast<int>(e)) = entries[e].state;
            w(static_cast<int>(e)) = sources[entries[e].source].weight;
          }
          if (!(w.sum() > 0.0)) continue;  // only dead sources saw it fire
          apn::update_condition(net, ti, states, w);
          updated_this_trial.insert(ti);
          report.events.push_back({k, net.transitions[ti].id,
                                   "condition_update",
                                   net.transitions[ti].condition->threshold});
        }
      }

      if (changed)
        for (auto& [id, pool] : pools)
          policies[id] = fit_pool(pool, sources, cfg, control_limit);

      ++k;

      const int count = static_cast<int>(report.verdicts.size());
      if (count >= cfg.window) {
        int hits = 0;
        for (int i = count - cfg.window; i < count; ++i)
          hits += report.verdicts[i];
        if (static_cast<double>(hits) >=
            cfg.target_rate * cfg.window - 1e-9) {
          report.termination = "learned";
          done = true;
        }
      }
      if (changed && !done) break;  // the rest of the batch ran on stale state
    }
  }
  if (!done) report.termination = "budget_exhausted";

  report.trials = static_cast<int>(report.verdicts.size());
  const int head = std::min(cfg.window, report.trials);
  if (head > 0) {
    int hits = 0;
    for (int i = 0; i < head; ++i) hits += report.verdicts[i];
    report.first_window_rate = static_cast<double>(hits) / head;
    hits = 0;
    for (int i = report.trials - head; i < report.trials; ++i)
      hits += report.verdicts[i];
    report.last_window_rate = static_cast<double>(hits) / head;
  }
  for (const auto& [id, pool] : pools) {
    report.policies[id] = {static_cast<int>(pool.points.size()),
                           static_cast<int>(pool.chosen.size())};
  }
  for (const Source& s : sources) {
    report.source_weights[s.id] = s.weight;
    report.source_styles[s.id] = s.style;
  }
  report.final_net = apn::serialize_net(net);
  return report;
}

std::string LearnReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["task"] = task;
  j["seed"] = seed;
  j["trials"] = trials;
  j["termination"] = termination;
  j["success_rate_first_window"] = first_window_rate;
  j["success_rate_last_window"] = last_window_rate;
  j["trial_scores"] = scores;
  nlohmann::ordered_json verdict_array = nlohmann::ordered_json::array();
  for (char v : verdicts) verdict_array.push_back(static_cast<int>(v));
  j["trial_verdicts"] = verdict_array;
  nlohmann::ordered_json event_array = nlohmann::ordered_json::array();
  for (const AdaptationEvent& e : events) {
    event_array.push_back({{"trial", e.trial},
                           {"target", e.target},
                           {"kind", e.kind},
                           {"value", e.value}});
  }
  j["events"] = event_array;
  nlohmann::ordered_json policy_obj = nlohmann::ordered_json::object();
  for (const auto& [id, info] : policies)
    policy_obj[id] = {{"pool_points", info.pool_points},
                      {"fit_points", info.fit_points}};
  j["policies"] = policy_obj;
  j["source_weights"] = source_weights;
  j["source_styles"] = source_styles;
  j["final_net"] = final_net;
  return j.dump(indent) + "\n";
}

}  // namespace cslearn::sim
