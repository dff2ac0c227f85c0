// Command-line front end: batch workflows over the library. Subcommands
// generate demonstrations, learn scoring criteria, fit policies, run trials,
// run the full learning loop, and render reports. stdout carries the human
// summary, stderr diagnostics; artifacts land on disk with the producing
// config embedded.

#include <CLI11.hpp>
#include <json.hpp>

#include "cslearn/apn.hpp"
#include "cslearn/error.hpp"
#include "cslearn/evaluation.hpp"
#include "cslearn/gpr.hpp"
#include "cslearn/random.hpp"
#include "cslearn/sim/demonstrate.hpp"
#include "cslearn/sim/loop.hpp"
#include "cslearn/sim/task.hpp"
#include "cslearn/sim/trial.hpp"
#include "cslearn/snapshot.hpp"
#include "cslearn/textio.hpp"
#include "cslearn/trace.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace {

using cslearn::Config;
using cslearn::Error;
using cslearn::format_double;

// Bad invocations (missing required flags and the like) exit 2 with the usage
// text, same as unknown flags. Everything else exits 1.
struct UsageError : Error {
  using Error::Error;
};

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string sci(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(1) << v;
  return s.str();
}

// Every tunable resolves as: built-in default, overridden by a key in the
// --config file, overridden by an explicit flag. Resolved values are echoed
// into the artifact reproducibility headers in resolution order.
struct Resolved {
  Config file;
  std::vector<std::pair<std::string, std::string>> echo;

  std::string str(const CLI::Option* opt, const std::string& key, const std::string& flag) {
    std::string v = (opt && opt->count() > 0) ? flag : file.get(key, flag);
    echo.emplace_back(key, v);
    return v;
  }
  double num(const CLI::Option* opt, const std::string& key, double flag) {
    double v = (opt && opt->count() > 0) ? flag : file.get(key, flag);
    echo.emplace_back(key, format_double(v));
    return v;
  }
  long integer(const CLI::Option* opt, const std::string& key, long flag) {
    long v = (opt && opt->count() > 0) ? flag : file.get(key, flag);
    echo.emplace_back(key, std::to_string(v));
    return v;
  }
  std::uint64_t seed_value(const CLI::Option* opt, std::uint64_t flag, bool& given) {
    given = (opt && opt->count() > 0) || file.has("seed");
    std::uint64_t v = (opt && opt->count() > 0)
                          ? flag
                          : static_cast<std::uint64_t>(file.get("seed", 0L));
    echo.emplace_back("seed", std::to_string(v));
    return v;
  }
  bool has(const CLI::Option* opt, const std::string& key) const {
    return (opt && opt->count() > 0) || file.has(key);
  }
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : echo) {
      if (k == key) {
        v = value;
        return;
      }
    }
    echo.emplace_back(key, value);
  }

  // key=value block, parseable by Config::parse.
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : echo) out += k + "=" + v + "\n";
    return out;
  }
  // The same block as '#' comment lines, for text artifacts.
  std::string comment() const {
    std::string out;
    for (const auto& [k, v] : echo) out += "# " + k + "=" + v + "\n";
    return out;
  }
};

Resolved resolve(const std::string& command, const std::string& config_path) {
  Resolved r;
  if (!config_path.empty()) r.file = Config::load(config_path);
  r.echo.emplace_back("command", command);
  return r;
}

// ---------------------------------------------------------------------------
// Binary artifact envelope: magic, version, kind, producing config, payload.

constexpr std::uint32_t kArtifactMagic = 0x72617363;  // "csar"

void save_artifact(const std::string& path, const std::string& kind,
                   const std::string& config_text,
                   const std::function<void(std::ostream&)>& payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  cslearn::snapshot::write_header(out, kArtifactMagic, 1);
  cslearn::snapshot::write_string(out, kind);
  cslearn::snapshot::write_string(out, config_text);
  payload(out);
  if (!out) throw Error("write failed: " + path);
}

// Checks the envelope and returns the embedded config text; the stream is
// left at the payload.
std::string open_artifact(std::istream& in, const std::string& kind, const std::string& path) {
  cslearn::snapshot::expect_header(in, kArtifactMagic, 1, "cslearn artifact");
  std::string stored = cslearn::snapshot::read_string(in);
  if (stored != kind) {
    throw Error(path + " holds a '" + stored + "' artifact, expected '" + kind + "'");
  }
  return cslearn::snapshot::read_string(in);
}

struct StoredPolicy {
  cslearn::gpr::Model model;
  int pool_points = 0;
  int fit_points = 0;
  double diag_spread = 1.0;
};

void write_policies(std::ostream& out,
                    const std::map<std::string, cslearn::sim::PolicySnapshot>& snaps) {
  cslearn::snapshot::write_u32(out, static_cast<std::uint32_t>(snaps.size()));
  for (const auto& [id, snap] : snaps) {
    cslearn::snapshot::write_string(out, id);
    cslearn::snapshot::write_u32(out, static_cast<std::uint32_t>(snap.pool_points));
    cslearn::snapshot::write_u32(out, static_cast<std::uint32_t>(snap.fit_points));
    cslearn::snapshot::write_f64(out, snap.diag_spread);
    snap.model.save(out);
  }
}

std::map<std::string, StoredPolicy> read_policies(std::istream& in) {
  std::map<std::string, StoredPolicy> out;
  const std::uint32_t n = cslearn::snapshot::read_u32(in);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string id = cslearn::snapshot::read_string(in);
    StoredPolicy p;
    p.pool_points = static_cast<int>(cslearn::snapshot::read_u32(in));
    p.fit_points = static_cast<int>(cslearn::snapshot::read_u32(in));
    p.diag_spread = cslearn::snapshot::read_f64(in);
    p.model = cslearn::gpr::Model::load(in);
    out.emplace(std::move(id), std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// demo: roll scripted mentor demonstrations and label them.

struct DemoOptions {
  std::string task = "pendulum";
  std::string style;
  long count = 1;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double budget = 10.0;
  double tick = 1e-3;
  long frame_ticks = 33;
  long delay_ticks = 33;
  double measurement_noise = 5e-3;
  std::string out_dir = "demos";
  std::string labels;
  bool corpus = false;
  std::string config_path;

  const CLI::Option* task_opt = nullptr;
  const CLI::Option* style_opt = nullptr;
  const CLI::Option* count_opt = nullptr;
  const CLI::Option* seed_opt = nullptr;
  const CLI::Option* noise_opt = nullptr;
  const CLI::Option* budget_opt = nullptr;
  const CLI::Option* tick_opt = nullptr;
  const CLI::Option* frame_opt = nullptr;
  const CLI::Option* delay_opt = nullptr;
  const CLI::Option* mnoise_opt = nullptr;
  const CLI::Option* out_dir_opt = nullptr;
  const CLI::Option* labels_opt = nullptr;
};

int run_demo(const DemoOptions& o) {
  Resolved r = resolve("demo", o.config_path);
  const std::string task = r.str(o.task_opt, "task", o.task);
  const std::string style = r.str(o.style_opt, "style", o.style);
  const long count = r.integer(o.count_opt, "count", o.count);
  bool seed_given = false;
  const std::uint64_t seed = r.seed_value(o.seed_opt, o.seed, seed_given);
  const double noise = r.num(o.noise_opt, "noise", o.noise);
  const double budget = r.num(o.budget_opt, "budget", o.budget);
  const double tick = r.num(o.tick_opt, "tick", o.tick);
  const long frame_ticks = r.integer(o.frame_opt, "frame_period_ticks", o.frame_ticks);
  const long delay_ticks = r.integer(o.delay_opt, "delay_ticks", o.delay_ticks);
  const double mnoise = r.num(o.mnoise_opt, "measurement_noise", o.measurement_noise);
  const std::string out_dir = r.str(o.out_dir_opt, "out_dir", o.out_dir);
  std::string labels = r.str(o.labels_opt, "labels", o.labels);
  if (labels.empty()) labels = out_dir + "/labels.txt";
  r.set("labels", labels);
  r.set("corpus", o.corpus ? "1" : "0");

  if (!o.corpus && !seed_given) {
    throw UsageError("--seed is required for demo (or a 'seed' config key)");
  }
  if (count < 1) throw Error("count must be at least 1");

  std::vector<cslearn::trace::LabeledDemonstration> demos;
  if (o.corpus) {
    demos = cslearn::sim::teaching_corpus(task);
  } else {
    const std::vector<std::string> styles = cslearn::sim::demo_styles(task);
    for (long i = 0; i < count; ++i) {
      cslearn::sim::DemoConfig c;
      c.task = task;
      c.style = style.empty() ? styles[static_cast<size_t>(i) % styles.size()] : style;
      c.seed = seed + static_cast<std::uint64_t>(i);
      c.control_noise = noise;
      c.tick = tick;
      c.budget = budget;
      c.frame_period_ticks = frame_ticks;
      c.delay_ticks = delay_ticks;
      c.measurement_noise = mnoise;
      demos.push_back(cslearn::sim::demonstrate(c));
    }
  }

  std::filesystem::create_directories(out_dir);
  const std::string header = r.comment();
  for (const auto& d : demos) {
    cslearn::write_file(out_dir + "/" + d.demo_id + ".csv",
                        header + cslearn::trace::write_csv(d.trace));
  }
  cslearn::write_file(labels,
                      header + cslearn::trace::write_labels(cslearn::trace::to_labels(demos)));

  for (const auto& d : demos) {
    std::cout << d.demo_id << ": " << (d.success ? "success" : "failure") << " overall "
              << fixed(d.overall_score, 2) << " terminal "
              << (d.trace.terminal_place.empty() ? "-" : d.trace.terminal_place) << " ("
              << d.trace.records.size() << " ticks)\n";
  }
  std::cout << "wrote " << demos.size() << " demos to " << out_dir << ", labels in " << labels
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// learn-criteria: fit score regressors from labeled demos.

struct CriteriaOptions {
  std::string skill;
  std::string demos_dir;
  std::string labels;
  double problem_threshold = 0.4;
  std::string out = "criteria.bin";
  std::string config_path;

  const CLI::Option* skill_opt = nullptr;
  const CLI::Option* demos_opt = nullptr;
  const CLI::Option* labels_opt = nullptr;
  const CLI::Option* pt_opt = nullptr;
  const CLI::Option* out_opt = nullptr;
};

int run_learn_criteria(const CriteriaOptions& o) {
  Resolved r = resolve("learn-criteria", o.config_path);
  const std::string skill = r.str(o.skill_opt, "skill", o.skill);
  const std::string demos_dir = r.str(o.demos_opt, "demos", o.demos_dir);
  std::string labels = r.str(o.labels_opt, "labels", o.labels);
  const double pt = r.num(o.pt_opt, "problem_threshold", o.problem_threshold);
  const std::string out_path = r.str(o.out_opt, "out", o.out);

  if (skill.empty()) throw UsageError("--skill is required");
  if (demos_dir.empty()) throw UsageError("--demos is required");
  if (labels.empty()) labels = demos_dir + "/labels.txt";
  r.set("labels", labels);

  const cslearn::apn::Net net = cslearn::apn::load_net(skill);
  const auto demos = cslearn::trace::load_labeled_demos(demos_dir, labels);
  const auto criteria = cslearn::evaluation::learn_criteria(demos, net, pt);

  save_artifact(out_path, "criteria", r.text(),
                [&](std::ostream& s) { criteria.save(s); });

  std::cout << "criteria from " << demos.size() << " demos: tau "
            << fixed(criteria.success_threshold, 3) << ", regressors";
  for (const auto& [id, model] : criteria.per_transition) std::cout << " " << id;
  std::cout << " + overall\n";
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit: pool demo segments and fit per-transition control policies.

struct FitOptions {
  std::string task;
  std::string skill;
  std::string demos_dir;
  std::string labels;
  long policy_points = 128;
  double cond_ceiling = 1e4;
  long stride = 10;
  double jitter = 1e-3;
  std::string out = "policies.bin";
  std::string config_path;

  const CLI::Option* task_opt = nullptr;
  const CLI::Option* skill_opt = nullptr;
  const CLI::Option* demos_opt = nullptr;
  const CLI::Option* labels_opt = nullptr;
  const CLI::Option* points_opt = nullptr;
  const CLI::Option* ceiling_opt = nullptr;
  const CLI::Option* stride_opt = nullptr;
  const CLI::Option* jitter_opt = nullptr;
  const CLI::Option* out_opt = nullptr;
};

int run_fit(const FitOptions& o) {
  Resolved r = resolve("fit", o.config_path);
  std::string task = r.str(o.task_opt, "task", o.task);
  const std::string skill = r.str(o.skill_opt, "skill", o.skill);
  const std::string demos_dir = r.str(o.demos_opt, "demos", o.demos_dir);
  std::string labels = r.str(o.labels_opt, "labels", o.labels);
  const long points = r.integer(o.points_opt, "policy_points", o.policy_points);
  const double ceiling = r.num(o.ceiling_opt, "cond_ceiling", o.cond_ceiling);
  const long stride = r.integer(o.stride_opt, "pool_stride", o.stride);
  const double jitter = r.num(o.jitter_opt, "policy_jitter", o.jitter);
  const std::string out_path = r.str(o.out_opt, "out", o.out);

  if (skill.empty()) throw UsageError("--skill is required");
  if (demos_dir.empty()) throw UsageError("--demos is required");
  if (labels.empty()) labels = demos_dir + "/labels.txt";
  r.set("labels", labels);

  const cslearn::apn::Net net = cslearn::apn::load_net(skill);
  const auto demos = cslearn::trace::load_labeled_demos(demos_dir, labels);
  if (task.empty()) task = demos.front().trace.task;
  if (task.empty()) throw Error("demos carry no task id; pass --task");
  r.set("task", task);

  cslearn::sim::LoopConfig lc;
  lc.task = task;
  lc.policy_points = static_cast<int>(points);
  lc.cond_ceiling = ceiling;
  lc.pool_stride = static_cast<int>(stride);
  lc.policy_jitter = jitter;
  const auto snaps = cslearn::sim::fit_policies(demos, net, lc);

  save_artifact(out_path, "policies", r.text(),
                [&](std::ostream& s) { write_policies(s, snaps); });

  for (const auto& [id, snap] : snaps) {
    std::cout << id << ": fit " << snap.fit_points << " of " << snap.pool_points
              << " pooled, spread " << sci(snap.diag_spread) << ", sigma "
              << fixed(snap.model.theta().sigma, 3) << ", length "
              << fixed(snap.model.theta().length, 3) << "\n";
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// trial: execute the skill once and self-evaluate the episode.

struct TrialOptions {
  std::string task;
  std::string skill;
  std::string policies;
  std::string criteria;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double budget = 10.0;
  double tick = 1e-3;
  std::string out_dir = "trials";
  std::string config_path;

  const CLI::Option* task_opt = nullptr;
  const CLI::Option* skill_opt = nullptr;
  const CLI::Option* policies_opt = nullptr;
  const CLI::Option* criteria_opt = nullptr;
  const CLI::Option* seed_opt = nullptr;
  const CLI::Option* noise_opt = nullptr;
  const CLI::Option* budget_opt = nullptr;
  const CLI::Option* tick_opt = nullptr;
  const CLI::Option* out_dir_opt = nullptr;
};

int run_trial_cmd(const TrialOptions& o) {
  Resolved r = resolve("trial", o.config_path);
  std::string task = r.str(o.task_opt, "task", o.task);
  const std::string skill = r.str(o.skill_opt, "skill", o.skill);
  const std::string policies_path = r.str(o.policies_opt, "policies", o.policies);
  const std::string criteria_path = r.str(o.criteria_opt, "criteria", o.criteria);
  bool seed_given = false;
  const std::uint64_t seed = r.seed_value(o.seed_opt, o.seed, seed_given);
  const double noise = r.num(o.noise_opt, "noise", o.noise);
  const double budget = r.num(o.budget_opt, "budget", o.budget);
  const double tick = r.num(o.tick_opt, "tick", o.tick);
  const std::string out_dir = r.str(o.out_dir_opt, "out_dir", o.out_dir);

  if (skill.empty()) throw UsageError("--skill is required");
  if (policies_path.empty()) throw UsageError("--policies is required");
  if (criteria_path.empty()) throw UsageError("--criteria is required");
  if (!seed_given) throw UsageError("--seed is required for trial (or a 'seed' config key)");

  const cslearn::apn::Net net = cslearn::apn::load_net(skill);

  std::ifstream pin(policies_path, std::ios::binary);
  if (!pin) throw Error("cannot open file: " + policies_path);
  const std::string policies_config = open_artifact(pin, "policies", policies_path);
  auto stored = read_policies(pin);

  std::ifstream cin_stream(criteria_path, std::ios::binary);
  if (!cin_stream) throw Error("cannot open file: " + criteria_path);
  open_artifact(cin_stream, "criteria", criteria_path);
  const auto criteria = cslearn::evaluation::ScoringCriteria::load(cin_stream);

  // The policies artifact records the task it was fitted for.
  if (task.empty()) task = Config::parse(policies_config).get("task", std::string());
  if (task.empty()) throw Error("policies artifact records no task; pass --task");
  r.set("task", task);

  auto plant = cslearn::sim::make_task(task);
  std::map<std::string, cslearn::gpr::Model> models;
  for (auto& [id, p] : stored) models.emplace(id, std::move(p.model));

  cslearn::sim::TrialConfig tc;
  tc.budget = budget;
  tc.tick = tick;
  tc.control_noise = noise;
  cslearn::Rng rng = cslearn::Rng::substream(seed, 0);
  cslearn::trace::Demonstration episode = cslearn::sim::run_trial(net, models, *plant, rng, tc);
  episode.seed = seed;

  const auto eval = cslearn::evaluation::score_trial(criteria, episode, net);

  std::filesystem::create_directories(out_dir);
  const std::string stem = "trial-" + std::to_string(seed);
  const std::string csv_path = out_dir + "/" + stem + ".csv";
  const std::string json_path = out_dir + "/" + stem + ".json";
  cslearn::write_file(csv_path, r.comment() + cslearn::trace::write_csv(episode));

  const double end_time = episode.records.back().t;
  nlohmann::ordered_json j;
  j["command"] = "trial";
  j["task"] = task;
  j["seed"] = seed;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.echo) cfg[k] = v;
  j["config"] = cfg;
  j["trace"] = stem + ".csv";
  j["ticks"] = episode.records.size();
  j["end_time"] = end_time;
  j["terminal_place"] = episode.terminal_place;
  nlohmann::ordered_json ev;
  ev["overall"] = eval.overall;
  ev["per_transition"] = eval.per_transition;
  ev["verdict"] = eval.verdict;
  ev["problematic"] = eval.problematic;
  j["evaluation"] = ev;
  cslearn::write_file(json_path, j.dump(2) + "\n");

  std::cout << "trial seed " << seed << ": terminal "
            << (episode.terminal_place.empty() ? "-" : episode.terminal_place) << " at "
            << fixed(end_time, 3) << " s, overall " << fixed(eval.overall, 3) << ", "
            << (eval.verdict ? "success" : "failure") << "\n";
  if (!eval.problematic.empty()) {
    std::cout << "problematic:";
    for (const auto& id : eval.problematic) std::cout << " " << id;
    std::cout << "\n";
  }
  std::cout << "wrote " << csv_path << " and " << json_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// learn: the full trial-and-adapt loop.

struct LearnOptions {
  std::string task;
  std::string skill;
  std::string demos_dir;
  std::string labels;
  std::uint64_t seed = 0;
  std::string out = "learn_report.json";
  long trials = 200;
  long window = 10;
  double target_rate = 0.8;
  double problem_threshold = 0.4;
  double noise = 0.0;
  double budget = 10.0;
  double tick = 1e-3;
  long policy_points = 128;
  double cond_ceiling = 1e4;
  long stride = 10;
  double jitter = 1e-3;
  double pseudo_gain = 0.5;
  double blame_rate = 5.0;
  long parallel_trials = 1;
  double kappa = 0.9;
  double lambda_floor = 0.05;
  bool progress = false;
  std::string config_path;

  const CLI::Option* task_opt = nullptr;
  const CLI::Option* skill_opt = nullptr;
  const CLI::Option* demos_opt = nullptr;
  const CLI::Option* labels_opt = nullptr;
  const CLI::Option* seed_opt = nullptr;
  const CLI::Option* out_opt = nullptr;
  const CLI::Option* trials_opt = nullptr;
  const CLI::Option* window_opt = nullptr;
  const CLI::Option* rate_opt = nullptr;
  const CLI::Option* pt_opt = nullptr;
  const CLI::Option* noise_opt = nullptr;
  const CLI::Option* budget_opt = nullptr;
  const CLI::Option* tick_opt = nullptr;
  const CLI::Option* points_opt = nullptr;
  const CLI::Option* ceiling_opt = nullptr;
  const CLI::Option* stride_opt = nullptr;
  const CLI::Option* jitter_opt = nullptr;
  const CLI::Option* pseudo_opt = nullptr;
  const CLI::Option* blame_opt = nullptr;
  const CLI::Option* parallel_opt = nullptr;
  const CLI::Option* kappa_opt = nullptr;
  const CLI::Option* floor_opt = nullptr;
};

int run_learn(const LearnOptions& o) {
  Resolved r = resolve("learn", o.config_path);
  std::string task = r.str(o.task_opt, "task", o.task);
  const std::string skill = r.str(o.skill_opt, "skill", o.skill);
  const std::string demos_dir = r.str(o.demos_opt, "demos", o.demos_dir);
  std::string labels = r.str(o.labels_opt, "labels", o.labels);
  bool seed_given = false;
  const std::uint64_t seed = r.seed_value(o.seed_opt, o.seed, seed_given);
  const std::string out_path = r.str(o.out_opt, "out", o.out);
  const long trials = r.integer(o.trials_opt, "trials", o.trials);
  const long window = r.integer(o.window_opt, "window", o.window);
  const double target_rate = r.num(o.rate_opt, "target_rate", o.target_rate);
  const double pt = r.num(o.pt_opt, "problem_threshold", o.problem_threshold);
  const double noise = r.num(o.noise_opt, "noise", o.noise);
  const double budget = r.num(o.budget_opt, "budget", o.budget);
  const double tick = r.num(o.tick_opt, "tick", o.tick);
  const long points = r.integer(o.points_opt, "policy_points", o.policy_points);
  const double ceiling = r.num(o.ceiling_opt, "cond_ceiling", o.cond_ceiling);
  const long stride = r.integer(o.stride_opt, "pool_stride", o.stride);
  const double jitter = r.num(o.jitter_opt, "policy_jitter", o.jitter);
  const double pseudo_gain = r.num(o.pseudo_opt, "pseudo_demo_gain", o.pseudo_gain);
  const double blame_rate = r.num(o.blame_opt, "blame_rate", o.blame_rate);
  const long parallel = r.integer(o.parallel_opt, "parallel_trials", o.parallel_trials);

  if (skill.empty()) throw UsageError("--skill is required");
  if (!seed_given) throw UsageError("--seed is required for learn (or a 'seed' config key)");

  cslearn::apn::Net net = cslearn::apn::load_net(skill);
  if (r.has(o.kappa_opt, "kappa")) net.kappa = r.num(o.kappa_opt, "kappa", o.kappa);
  if (r.has(o.floor_opt, "lambda_floor")) {
    net.lambda_floor = r.num(o.floor_opt, "lambda_floor", o.lambda_floor);
  }

  std::vector<cslearn::trace::LabeledDemonstration> demos;
  if (demos_dir.empty()) {
    if (task.empty()) task = "pendulum";
    demos = cslearn::sim::teaching_corpus(task);
  } else {
    if (labels.empty()) labels = demos_dir + "/labels.txt";
    r.set("labels", labels);
    demos = cslearn::trace::load_labeled_demos(demos_dir, labels);
    if (task.empty()) task = demos.front().trace.task;
    if (task.empty()) throw Error("demos carry no task id; pass --task");
  }
  r.set("task", task);

  cslearn::sim::LoopConfig lc;
  lc.task = task;
  lc.seed = seed;
  lc.trial_budget = static_cast<int>(trials);
  lc.window = static_cast<int>(window);
  lc.target_rate = target_rate;
  lc.problem_threshold = pt;
  lc.cond_ceiling = ceiling;
  lc.policy_points = static_cast<int>(points);
  lc.pool_stride = static_cast<int>(stride);
  lc.policy_jitter = jitter;
  lc.pseudo_demo_gain = pseudo_gain;
  lc.blame_rate = blame_rate;
  lc.parallel_trials = static_cast<int>(parallel);
  lc.trial.budget = budget;
  lc.trial.tick = tick;
  lc.trial.control_noise = noise;
  if (o.progress) {
    lc.on_trial = [](int k, const cslearn::evaluation::TrialEvaluation& e) {
      std::cerr << "trial " << k << ": score " << fixed(e.overall, 3)
                << (e.verdict ? " success" : " failure") << "\n";
    };
  }

  const auto report = cslearn::sim::composite_learning_loop(lc, net, demos);

  nlohmann::ordered_json j = nlohmann::ordered_json::parse(report.to_json());
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.echo) cfg[k] = v;
  j["config"] = cfg;
  cslearn::write_file(out_path, j.dump(2) + "\n");

  if (report.termination == "learned") {
    std::cout << "learned " << task << " in " << report.trials << " trials (seed " << seed
              << ")\n";
  } else {
    std::cout << "budget exhausted after " << report.trials << " trials on " << task
              << " (seed " << seed << ")\n";
  }
  const int head = std::min<int>(static_cast<int>(window), report.trials);
  std::cout << "success rate: first " << head << " trials " << fixed(report.first_window_rate, 2)
            << ", last " << head << " trials " << fixed(report.last_window_rate, 2) << "\n";
  int decays = 0, updates = 0, down_weights = 0;
  for (const auto& e : report.events) {
    if (e.kind == "decay") ++decays;
    if (e.kind == "condition_update") ++updates;
    if (e.kind == "down_weight") ++down_weights;
  }
  std::cout << "adaptation: " << decays << " decays, " << updates << " condition updates, "
            << down_weights << " down-weights\n";
  std::vector<std::pair<std::string, double>> weights(report.source_weights.begin(),
                                                      report.source_weights.end());
  std::sort(weights.begin(), weights.end(),
            [](const auto& a, const auto& b) { return a.second > b.second; });
  std::cout << "final weights:";
  for (const auto& [id, w] : weights) std::cout << " " << id << " " << fixed(w, 3);
  std::cout << "\n";
  std::cout << "report: " << out_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report: render a JSON report as plain text.

struct ReportOptions {
  std::string input;
  std::string out;
};

std::string render_learn_report(const nlohmann::json& j) {
  std::ostringstream s;
  s << "learn report: task " << j.value("task", std::string("?")) << ", seed "
    << j.value("seed", static_cast<std::uint64_t>(0)) << "\n";
  const int trials = j.value("trials", 0);
  s << "termination: " << j.value("termination", std::string("?")) << " after " << trials
    << " trials\n";
  s << "success rate: first window " << fixed(j.value("success_rate_first_window", 0.0), 2)
    << ", last window " << fixed(j.value("success_rate_last_window", 0.0), 2) << "\n";

  if (j.contains("trial_scores") && !j["trial_scores"].empty()) {
    const auto& scores = j["trial_scores"];
    double lo = 1e300, hi = -1e300, sum = 0.0;
    for (const auto& v : scores) {
      const double x = v.get<double>();
      lo = std::min(lo, x);
      hi = std::max(hi, x);
      sum += x;
    }
    s << "scores: min " << fixed(lo, 3) << ", mean "
      << fixed(sum / static_cast<double>(scores.size()), 3) << ", max " << fixed(hi, 3) << "\n";
  }
  if (j.contains("trial_verdicts") && !j["trial_verdicts"].empty()) {
    s << "verdicts (.=failure #=success):\n";
    std::string strip;
    for (const auto& v : j["trial_verdicts"]) strip += v.get<int>() ? '#' : '.';
    for (size_t i = 0; i < strip.size(); i += 60) {
      s << "  " << strip.substr(i, 60) << "\n";
    }
  }

  if (j.contains("events")) {
    const auto& events = j["events"];
    s << "adaptation events (" << events.size() << "):\n";
    const size_t cap = 40;
    size_t shown = 0;
    for (const auto& e : events) {
      if (shown == cap) {
        s << "  ... " << (events.size() - cap) << " more\n";
        break;
      }
      s << "  trial " << std::setw(3) << e.value("trial", 0) << "  "
        << e.value("kind", std::string("?")) << "  " << e.value("target", std::string("?"))
        << " -> " << fixed(e.value("value", 0.0), 4) << "\n";
      ++shown;
    }
  }

  if (j.contains("policies")) {
    s << "policies:\n";
    for (const auto& [id, info] : j["policies"].items()) {
      s << "  " << id << ": fit " << info.value("fit_points", 0) << " of "
        << info.value("pool_points", 0) << " pooled\n";
    }
  }

  if (j.contains("source_weights")) {
    std::vector<std::pair<std::string, double>> weights;
    for (const auto& [id, w] : j["source_weights"].items()) {
      weights.emplace_back(id, w.get<double>());
    }
    std::sort(weights.begin(), weights.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    s << "source weights:\n";
    for (const auto& [id, w] : weights) {
      std::string style;
      if (j.contains("source_styles") && j["source_styles"].contains(id)) {
        style = " (" + j["source_styles"][id].get<std::string>() + ")";
      }
      s << "  " << id << style << ": " << fixed(w, 4) << "\n";
    }
  }

  if (j.contains("final_net")) {
    s << "final net:\n";
    for (const std::string& line : cslearn::split(j["final_net"].get<std::string>(), '\n')) {
      if (!line.empty()) s << "  " << line << "\n";
    }
  }
  return s.str();
}

std::string render_trial_report(const nlohmann::json& j) {
  std::ostringstream s;
  s << "trial report: task " << j.value("task", std::string("?")) << ", seed "
    << j.value("seed", static_cast<std::uint64_t>(0)) << "\n";
  s << "terminal: "
    << (j.value("terminal_place", std::string()).empty() ? std::string("-")
                                                         : j["terminal_place"].get<std::string>())
    << " at " << fixed(j.value("end_time", 0.0), 3) << " s (" << j.value("ticks", 0)
    << " ticks)\n";
  const auto& ev = j["evaluation"];
  s << "overall: " << fixed(ev.value("overall", 0.0), 3) << " -> "
    << (ev.value("verdict", false) ? "success" : "failure") << "\n";
  if (ev.contains("per_transition") && !ev["per_transition"].empty()) {
    s << "per transition:";
    for (const auto& [id, score] : ev["per_transition"].items()) {
      s << " " << id << " " << fixed(score.get<double>(), 3);
    }
    s << "\n";
  }
  if (ev.contains("problematic") && !ev["problematic"].empty()) {
    s << "problematic:";
    for (const auto& id : ev["problematic"]) s << " " << id.get<std::string>();
    s << "\n";
  } else {
    s << "problematic: none\n";
  }
  return s.str();
}

int run_report(const ReportOptions& o) {
  const std::string text = cslearn::read_file(o.input);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(o.input + ": " + e.what());
  }

  std::string rendered;
  if (j.contains("termination")) {
    rendered = render_learn_report(j);
  } else if (j.contains("evaluation")) {
    rendered = render_trial_report(j);
  } else {
    throw Error("unrecognized report layout in " + o.input);
  }

  if (o.out.empty()) {
    std::cout << rendered;
  } else {
    cslearn::write_file(o.out, rendered);
    std::cout << "wrote " << o.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Wiring.

void setup_demo(CLI::App& app, std::function<int()>& action) {
  auto o = std::make_shared<DemoOptions>();
  CLI::App* cmd = app.add_subcommand("demo", "Generate labeled mentor demonstrations");
  o->task_opt = cmd->add_option("--task", o->task, "Task id (pendulum, nunchaku)")
                    ->capture_default_str();
  o->style_opt = cmd->add_option("--style", o->style,
                                 "Mentor style; default cycles through the task's styles");
  o->count_opt = cmd->add_option("--count", o->count, "Number of demos")->capture_default_str();
  o->seed_opt = cmd->add_option("--seed", o->seed, "Master seed; demo i uses seed+i");
  o->noise_opt = cmd->add_option("--noise", o->noise, "Mentor control noise stddev")
                     ->capture_default_str();
  o->budget_opt = cmd->add_option("--budget", o->budget, "Episode budget, seconds")
                      ->capture_default_str();
  o->tick_opt = cmd->add_option("--tick", o->tick, "Tick period, seconds")->capture_default_str();
  o->frame_opt = cmd->add_option("--frame-ticks", o->frame_ticks, "Capture frame period, ticks")
                     ->capture_default_str();
  o->delay_opt = cmd->add_option("--delay-ticks", o->delay_ticks, "Capture delay, ticks")
                     ->capture_default_str();
  o->mnoise_opt = cmd->add_option("--measurement-noise", o->measurement_noise,
                                  "Captured position noise stddev")
                      ->capture_default_str();
  o->out_dir_opt = cmd->add_option("--out-dir", o->out_dir, "Output directory")
                       ->capture_default_str();
  o->labels_opt = cmd->add_option("--labels", o->labels, "Label file; default <out-dir>/labels.txt");
  cmd->add_flag("--corpus", o->corpus,
                "Write the task's shipped teaching corpus (ignores --style/--count/--seed)");
  cmd->add_option("--config", o->config_path, "key=value config file; flags override it");
  cmd->callback([o, &action] { action = [o] { return run_demo(*o); }; });
}

void setup_learn_criteria(CLI::App& app, std::function<int()>& action) {
  auto o = std::make_shared<CriteriaOptions>();
  CLI::App* cmd =
      app.add_subcommand("learn-criteria", "Learn scoring criteria from labeled demos");
  o->skill_opt = cmd->add_option("--skill", o->skill, "Skill net file");
  o->demos_opt = cmd->add_option("--demos", o->demos_dir, "Demo directory");
  o->labels_opt = cmd->add_option("--labels", o->labels, "Label file; default <demos>/labels.txt");
  o->pt_opt = cmd->add_option("--problem-threshold", o->problem_threshold,
                              "Per-transition score below this flags the transition")
                  ->capture_default_str();
  o->out_opt = cmd->add_option("--out", o->out, "Criteria artifact path")->capture_default_str();
  cmd->add_option("--config", o->config_path, "key=value config file; flags override it");
  cmd->callback([o, &action] { action = [o] { return run_learn_criteria(*o); }; });
}

void setup_fit(CLI::App& app, std::function<int()>& action) {
  auto o = std::make_shared<FitOptions>();
  CLI::App* cmd = app.add_subcommand("fit", "Fit per-transition control policies from demos");
  o->task_opt = cmd->add_option("--task", o->task, "Task id; default from the demos");
  o->skill_opt = cmd->add_option("--skill", o->skill, "Skill net file");
  o->demos_opt = cmd->add_option("--demos", o->demos_dir, "Demo directory");
  o->labels_opt = cmd->add_option("--labels", o->labels, "Label file; default <demos>/labels.txt");
  o->points_opt = cmd->add_option("--policy-points", o->policy_points,
                                  "Coverage floor on the fitted subset size")
                      ->capture_default_str();
  o->ceiling_opt = cmd->add_option("--cond-ceiling", o->cond_ceiling,
                                   "Conditioning ceiling for subset selection")
                       ->capture_default_str();
  o->stride_opt = cmd->add_option("--stride", o->stride, "Keep every stride-th segment tick")
                      ->capture_default_str();
  o->jitter_opt = cmd->add_option("--jitter", o->jitter, "Noise variance floor for policy fits")
                      ->capture_default_str();
  o->out_opt = cmd->add_option("--out", o->out, "Policies artifact path")->capture_default_str();
  cmd->add_option("--config", o->config_path, "key=value config file; flags override it");
  cmd->callback([o, &action] { action = [o] { return run_fit(*o); }; });
}

void setup_trial(CLI::App& app, std::function<int()>& action) {
  auto o = std::make_shared<TrialOptions>();
  CLI::App* cmd = app.add_subcommand("trial", "Run one trial and self-evaluate it");
  o->task_opt = cmd->add_option("--task", o->task, "Task id; default from the policies artifact");
  o->skill_opt = cmd->add_option("--skill", o->skill, "Skill net file");
  o->policies_opt = cmd->add_option("--policies", o->policies, "Policies artifact (from fit)");
  o->criteria_opt =
      cmd->add_option("--criteria", o->criteria, "Criteria artifact (from learn-criteria)");
  o->seed_opt = cmd->add_option("--seed", o->seed, "Trial seed");
  o->noise_opt = cmd->add_option("--noise", o->noise, "Control noise stddev")
                     ->capture_default_str();
  o->budget_opt = cmd->add_option("--budget", o->budget, "Episode budget, seconds")
                      ->capture_default_str();
  o->tick_opt = cmd->add_option("--tick", o->tick, "Tick period, seconds")->capture_default_str();
  o->out_dir_opt = cmd->add_option("--out-dir", o->out_dir, "Output directory")
                       ->capture_default_str();
  cmd->add_option("--config", o->config_path, "key=value config file; flags override it");
  cmd->callback([o, &action] { action = [o] { return run_trial_cmd(*o); }; });
}

void setup_learn(CLI::App& app, std::function<int()>& action) {
  auto o = std::make_shared<LearnOptions>();
  CLI::App* cmd = app.add_subcommand("learn", "Run the full trial-and-adapt learning loop");
  o->task_opt = cmd->add_option("--task", o->task, "Task id; default from the demos");
  o->skill_opt = cmd->add_option("--skill", o->skill, "Skill net file");
  o->demos_opt = cmd->add_option("--demos", o->demos_dir,
                                 "Demo directory; default is the shipped teaching corpus");
  o->labels_opt = cmd->add_option("--labels", o->labels, "Label file; default <demos>/labels.txt");
  o->seed_opt = cmd->add_option("--seed", o->seed, "Master seed; trial k uses substream k");
  o->out_opt = cmd->add_option("--out", o->out, "Report path")->capture_default_str();
  o->trials_opt = cmd->add_option("--trials", o->trials, "Trial budget")->capture_default_str();
  o->window_opt = cmd->add_option("--window", o->window, "Success window W")
                      ->capture_default_str();
  o->rate_opt = cmd->add_option("--target-rate", o->target_rate,
                                "Required success rate over the last W trials")
                    ->capture_default_str();
  o->pt_opt = cmd->add_option("--problem-threshold", o->problem_threshold,
                              "Per-transition score below this flags the transition")
                  ->capture_default_str();
  o->noise_opt = cmd->add_option("--noise", o->noise, "Trial control noise stddev")
                     ->capture_default_str();
  o->budget_opt = cmd->add_option("--budget", o->budget, "Per-trial budget, seconds")
                      ->capture_default_str();
  o->tick_opt = cmd->add_option("--tick", o->tick, "Tick period, seconds")->capture_default_str();
  o->points_opt = cmd->add_option("--policy-points", o->policy_points,
                                  "Coverage floor on the fitted subset size")
                      ->capture_default_str();
  o->ceiling_opt = cmd->add_option("--cond-ceiling", o->cond_ceiling,
                                   "Conditioning ceiling for subset selection")
                       ->capture_default_str();
  o->stride_opt = cmd->add_option("--stride", o->stride, "Keep every stride-th segment tick")
                      ->capture_default_str();
  o->jitter_opt = cmd->add_option("--jitter", o->jitter, "Noise variance floor for policy fits")
                      ->capture_default_str();
  o->pseudo_opt = cmd->add_option("--pseudo-gain", o->pseudo_gain,
                                  "Weight share of a successful trial's data")
                      ->capture_default_str();
  o->blame_opt = cmd->add_option("--blame-rate", o->blame_rate,
                                 "Down-weighting rate for actuator overdrive")
                     ->capture_default_str();
  o->parallel_opt = cmd->add_option("--parallel-trials", o->parallel_trials,
                                    "Speculative trial workers; results match sequential runs")
                        ->capture_default_str();
  o->kappa_opt = cmd->add_option("--kappa", o->kappa, "Override the net's decay factor");
  o->floor_opt = cmd->add_option("--lambda-floor", o->lambda_floor,
                                 "Override the net's condition-update floor");
  cmd->add_flag("--progress", o->progress, "Per-trial progress lines on stderr");
  cmd->add_option("--config", o->config_path, "key=value config file; flags override it");
  cmd->callback([o, &action] { action = [o] { return run_learn(*o); }; });
}

void setup_report(CLI::App& app, std::function<int()>& action) {
  auto o = std::make_shared<ReportOptions>();
  CLI::App* cmd = app.add_subcommand("report", "Render a JSON report as plain text");
  cmd->add_option("input", o->input, "Report JSON (from learn or trial)")->required();
  cmd->add_option("--out", o->out, "Write the text here instead of stdout");
  cmd->callback([o, &action] { action = [o] { return run_report(*o); }; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite skill learning over adaptive Petri nets"};
  app.require_subcommand(1);

  std::function<int()> action;
  setup_demo(app, action);
  setup_learn_criteria(app, action);
  setup_fit(app, action);
  setup_trial(app, action);
  setup_learn(app, action);
  setup_report(app, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (!action) {
      std::cerr << app.help();
      return 2;
    }
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
