#include "cslearn/trace.hpp"

#include "cslearn/error.hpp"
#include "cslearn/textio.hpp"

namespace cslearn::trace {

int Demonstration::sensed_dim() const {
  return records.empty() ? 0 : static_cast<int>(records.front().sensed.size());
}

int Demonstration::control_dim() const {
  return records.empty() ? 0 : static_cast<int>(records.front().control.size());
}

std::vector<std::string> Demonstration::fired_transitions() const {
  std::vector<std::string> out;
  for (const TickRecord& r : records) {
    if (r.transition.empty()) continue;
    if (out.empty() || out.back() != r.transition) {
      bool seen = false;
      for (const std::string& id : out) {
        if (id == r.transition) seen = true;
      }
      if (!seen) out.push_back(r.transition);
    }
  }
  return out;
}

std::map<std::string, Eigen::VectorXd> Demonstration::first_firing_states() const {
  std::map<std::string, Eigen::VectorXd> out;
  for (const TickRecord& r : records) {
    if (!r.transition.empty() && !out.count(r.transition)) {
      out.emplace(r.transition, r.sensed);
    }
  }
  return out;
}

std::vector<size_t> Demonstration::firing_ticks(const std::string& transition) const {
  std::vector<size_t> out;
  std::string prev;
  for (size_t i = 0; i < records.size(); ++i) {
    const std::string& cur = records[i].transition;
    if (cur == transition && cur != prev) out.push_back(i);
    prev = cur;
  }
  return out;
}

std::string write_csv(const Demonstration& demo) {
  if (demo.records.empty()) throw Error("refusing to write an empty trace");
  int d = demo.sensed_dim();
  int c = demo.control_dim();
  std::string out;
  out += "# task=" + demo.task + "\n";
  out += "# style=" + demo.style + "\n";
  out += "# seed=" + std::to_string(demo.seed) + "\n";
  out += "# noise=" + format_double(demo.noise) + "\n";
  out += "# tick=" + format_double(demo.tick_period) + "\n";
  out += "# terminal=" + demo.terminal_place + "\n";
  out += "t";
  for (int i = 0; i < d; ++i) out += ",x" + std::to_string(i);
  for (int i = 0; i < c; ++i) out += ",u" + std::to_string(i);
  out += ",transition\n";
  for (const TickRecord& r : demo.records) {
    if (r.sensed.size() != d || r.control.size() != c) {
      throw Error("inconsistent record dimensions in trace");
    }
    out += format_double(r.t);
    for (int i = 0; i < d; ++i) out += "," + format_double(r.sensed(i));
    for (int i = 0; i < c; ++i) out += "," + format_double(r.control(i));
    out += "," + r.transition + "\n";
  }
  return out;
}

Demonstration read_csv(const std::string& content) {
  Demonstration demo;
  std::vector<std::string> lines = split(content, '\n');
  size_t li = 0;
  int lineno = 0;
  for (; li < lines.size(); ++li) {
    ++lineno;
    const std::string& line = lines[li];
    if (line.rfind("#", 0) != 0) break;
    std::string body = trim(line.substr(1));
    size_t eq = body.find('=');
    if (eq == std::string::npos) continue;
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key == "task") demo.task = value;
    else if (key == "style") demo.style = value;
    else if (key == "seed") demo.seed = static_cast<std::uint64_t>(parse_long_at(value, lineno));
    else if (key == "noise") demo.noise = parse_double_at(value, lineno);
    else if (key == "tick") demo.tick_period = parse_double_at(value, lineno);
    else if (key == "terminal") demo.terminal_place = value;
  }
  if (li >= lines.size()) throw Error("trace has no header row");
  std::vector<std::string> header = split(lines[li], ',');
  int header_line = lineno;
  if (header.size() < 3 || header.front() != "t" || header.back() != "transition") {
    throw ParseError("expected header t,x...,u...,transition", header_line);
  }
  int d = 0, c = 0;
  for (size_t i = 1; i + 1 < header.size(); ++i) {
    if (header[i] == "x" + std::to_string(d)) {
      ++d;
    } else if (header[i] == "u" + std::to_string(c)) {
      ++c;
    } else {
      throw ParseError("unexpected column '" + header[i] + "'", header_line);
    }
  }
  for (++li, ++lineno; li < lines.size(); ++li, ++lineno) {
    if (trim(lines[li]).empty()) continue;
    std::vector<std::string> parts = split(lines[li], ',');
    if (static_cast<int>(parts.size()) != 2 + d + c) {
      throw ParseError("expected " + std::to_string(2 + d + c) + " fields", lineno);
    }
    TickRecord r;
    r.t = parse_double_at(parts[0], lineno);
    r.sensed.resize(d);
    for (int i = 0; i < d; ++i) r.sensed(i) = parse_double_at(parts[1 + i], lineno);
    r.control.resize(c);
    for (int i = 0; i < c; ++i) r.control(i) = parse_double_at(parts[1 + d + i], lineno);
    r.transition = parts.back();
    demo.records.push_back(std::move(r));
  }
  if (demo.records.empty()) throw Error("trace has no records");
  return demo;
}

void save_csv(const Demonstration& demo, const std::string& path) {
  write_file(path, write_csv(demo));
}

Demonstration load_csv(const std::string& path) { return read_csv(read_file(path)); }

std::string write_labels(const std::vector<LabelLine>& labels) {
  std::string out;
  for (const LabelLine& l : labels) {
    out += l.demo_id + " " + (l.success ? "1" : "0") + " " + format_double(l.overall_score);
    for (const auto& [id, score] : l.per_transition_scores) {
      out += " " + id + ":" + format_double(score);
    }
    out += "\n";
  }
  return out;
}

std::vector<LabelLine> parse_labels(const std::string& content) {
  std::vector<LabelLine> out;
  int lineno = 0;
  for (const std::string& raw : split(content, '\n')) {
    ++lineno;
    std::string line = raw;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::vector<std::string> tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) throw ParseError("expected: demo_id success score ...", lineno);
    LabelLine l;
    l.demo_id = tok[0];
    if (tok[1] == "1") {
      l.success = true;
    } else if (tok[1] == "0") {
      l.success = false;
    } else {
      throw ParseError("success flag must be 0 or 1", lineno);
    }
    l.overall_score = parse_double_at(tok[2], lineno);
    for (size_t i = 3; i < tok.size(); ++i) {
      size_t colon = tok[i].find(':');
      if (colon == std::string::npos) {
        throw ParseError("expected transition:score, got '" + tok[i] + "'", lineno);
      }
      std::string id = tok[i].substr(0, colon);
      double score = parse_double_at(tok[i].substr(colon + 1), lineno);
      if (!l.per_transition_scores.emplace(id, score).second) {
        throw ParseError("duplicate score for '" + id + "'", lineno);
      }
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::vector<LabelLine> to_labels(const std::vector<LabeledDemonstration>& demos) {
  std::vector<LabelLine> out;
  out.reserve(demos.size());
  for (const LabeledDemonstration& d : demos) {
    out.push_back({d.demo_id, d.success, d.overall_score, d.per_transition_scores});
  }
  return out;
}

std::vector<LabeledDemonstration> load_labeled_demos(const std::string& dir,
                                                     const std::string& label_path) {
  std::vector<LabelLine> labels = parse_labels(read_file(label_path));
  if (labels.empty()) throw Error("label file is empty: " + label_path);
  std::vector<LabeledDemonstration> out;
  for (const LabelLine& l : labels) {
    LabeledDemonstration d;
    d.demo_id = l.demo_id;
    d.trace = load_csv(dir + "/" + l.demo_id + ".csv");
    d.success = l.success;
    d.overall_score = l.overall_score;
    d.per_transition_scores = l.per_transition_scores;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace cslearn::trace
