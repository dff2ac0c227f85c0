#include "cslearn/apn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cslearn/error.hpp"
#include "cslearn/textio.hpp"

namespace cslearn::apn {

namespace {

bool valid_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

bool FiringCondition::satisfied(const Eigen::VectorXd& sensed) const {
  if (sensed.size() != projection.size()) {
    throw Error("sensed state has dimension " + std::to_string(sensed.size()) +
                ", condition expects " + std::to_string(projection.size()));
  }
  double v = projection.dot(sensed);
  return op == ConditionOp::ge ? v >= threshold : v <= threshold;
}

int Net::place_index(const std::string& id) const {
  for (size_t i = 0; i < places.size(); ++i) {
    if (places[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int Net::transition_index(const std::string& id) const {
  for (size_t i = 0; i < transitions.size(); ++i) {
    if (transitions[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

void validate(const Net& net) {
  if (!(net.kappa > 0.0 && net.kappa < 1.0)) {
    throw Error("kappa must be in (0, 1), got " + format_double(net.kappa));
  }
  if (!(net.lambda_floor > 0.0 && net.lambda_floor < 1.0)) {
    throw Error("lambda_floor must be in (0, 1), got " + format_double(net.lambda_floor));
  }
  if (net.places.empty()) throw Error("net has no places");
  std::set<std::string> ids;
  for (const Place& p : net.places) {
    if (!valid_id(p.id)) throw Error("bad place id '" + p.id + "'");
    if (!ids.insert(p.id).second) throw Error("duplicate id '" + p.id + "'");
  }
  for (const Transition& t : net.transitions) {
    if (!valid_id(t.id)) throw Error("bad transition id '" + t.id + "'");
    if (!ids.insert(t.id).second) throw Error("duplicate id '" + t.id + "'");
    if (!(t.lambda >= 0.0 && t.lambda <= 1.0)) {
      throw Error("lambda of '" + t.id + "' outside [0, 1]: " + format_double(t.lambda));
    }
    if (!(t.lambda_initial >= 0.0 && t.lambda_initial <= 1.0)) {
      throw Error("initial lambda of '" + t.id + "' outside [0, 1]");
    }
    if (t.condition && !std::isfinite(t.condition->threshold)) {
      throw Error("non-finite threshold on '" + t.id + "'");
    }
    if (t.condition && !t.condition->projection.allFinite()) {
      throw Error("non-finite projection on '" + t.id + "'");
    }
  }
  int dim = -1;
  for (const Transition& t : net.transitions) {
    if (!t.condition) continue;
    int d = static_cast<int>(t.condition->projection.size());
    if (dim < 0) dim = d;
    if (d != dim) {
      throw Error("condition on '" + t.id + "' has projection dimension " + std::to_string(d) +
                  ", others use " + std::to_string(dim));
    }
  }
  size_t nt = net.transitions.size();
  if (net.inputs.size() != nt || net.outputs.size() != nt) {
    throw Error("arc lists do not match transition count");
  }
  int np = static_cast<int>(net.places.size());
  for (size_t i = 0; i < nt; ++i) {
    // Arc-level form of "no isolated transition column": a self-loop cancels
    // in the incidence matrix, so the requirement lives on the arc lists.
    if (net.inputs[i].empty()) {
      throw Error("transition '" + net.transitions[i].id + "' has no input arc");
    }
    if (net.outputs[i].empty()) {
      throw Error("transition '" + net.transitions[i].id + "' has no output arc");
    }
    for (int p : net.inputs[i]) {
      if (p < 0 || p >= np) throw Error("arc references unknown place index");
    }
    for (int p : net.outputs[i]) {
      if (p < 0 || p >= np) throw Error("arc references unknown place index");
    }
    const std::set<int> seen_in(net.inputs[i].begin(), net.inputs[i].end());
    if (seen_in.size() != net.inputs[i].size()) {
      throw Error("duplicate input arc on '" + net.transitions[i].id + "'");
    }
    const std::set<int> seen_out(net.outputs[i].begin(), net.outputs[i].end());
    if (seen_out.size() != net.outputs[i].size()) {
      throw Error("duplicate output arc on '" + net.transitions[i].id + "'");
    }
  }
  if (net.initial_marking.size() != np) {
    throw Error("marking has " + std::to_string(net.initial_marking.size()) + " entries for " +
                std::to_string(np) + " places");
  }
  if ((net.initial_marking.array() < 0).any()) throw Error("negative token count in marking");
}

Eigen::MatrixXi incidence_matrix(const Net& net) {
  Eigen::MatrixXi a = Eigen::MatrixXi::Zero(static_cast<int>(net.places.size()),
                                            static_cast<int>(net.transitions.size()));
  for (size_t t = 0; t < net.transitions.size(); ++t) {
    for (int p : net.inputs[t]) a(p, static_cast<int>(t)) -= 1;
    for (int p : net.outputs[t]) a(p, static_cast<int>(t)) += 1;
  }
  return a;
}

std::vector<int> enabled_decisions(const Net& net, const Marking& marking,
                                   const Eigen::VectorXd& sensed) {
  if (marking.size() != static_cast<int>(net.places.size())) {
    throw Error("marking size does not match net");
  }
  std::vector<int> out;
  for (size_t t = 0; t < net.transitions.size(); ++t) {
    bool marked = true;
    for (int p : net.inputs[t]) {
      if (marking(p) < 1) {
        marked = false;
        break;
      }
    }
    if (!marked) continue;
    const Transition& tr = net.transitions[t];
    if (tr.condition && !tr.condition->satisfied(sensed)) continue;
    out.push_back(static_cast<int>(t));
  }
  return out;
}

Eigen::VectorXi sample_firing_vector(const std::vector<int>& decisions,
                                     const Eigen::VectorXd& lambdas, Rng& rng) {
  Eigen::VectorXi firing = Eigen::VectorXi::Zero(lambdas.size());
  for (int t : decisions) {
    if (t < 0 || t >= lambdas.size()) throw Error("decision index out of range");
    if (rng.bernoulli(lambdas(t))) firing(t) = 1;
  }
  return firing;
}

Eigen::VectorXd lambda_vector(const Net& net) {
  Eigen::VectorXd v(static_cast<int>(net.transitions.size()));
  for (size_t t = 0; t < net.transitions.size(); ++t) v(static_cast<int>(t)) = net.transitions[t].lambda;
  return v;
}

StepResult step_marking(const Net& net, const Marking& marking, const Eigen::VectorXi& firing) {
  if (firing.size() != static_cast<int>(net.transitions.size())) {
    throw Error("firing vector size does not match net");
  }
  StepResult res;
  res.marking = marking;
  for (int t = 0; t < firing.size(); ++t) {
    if (firing(t) == 0) continue;
    bool ok = true;
    for (int p : net.inputs[t]) {
      if (res.marking(p) < 1) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      // Lost the conflict for a shared token to a lower-index transition.
      res.suppressed.push_back(t);
      continue;
    }
    for (int p : net.inputs[t]) res.marking(p) -= 1;
    for (int p : net.outputs[t]) res.marking(p) += 1;
    res.applied.push_back(t);
  }
  return res;
}

bool decay(Net& net, int transition) {
  if (transition < 0 || transition >= static_cast<int>(net.transitions.size())) {
    throw Error("transition index out of range");
  }
  Transition& tr = net.transitions[transition];
  if (tr.lambda <= net.lambda_floor) return false;  // already settled on the floor
  tr.lambda *= net.kappa;
  if (tr.lambda < net.lambda_floor) {
    tr.lambda = net.lambda_floor;
    return true;
  }
  return false;
}

void update_condition(Net& net, int transition, const Eigen::MatrixXd& states,
                      const Eigen::VectorXd& weights) {
  if (transition < 0 || transition >= static_cast<int>(net.transitions.size())) {
    throw Error("transition index out of range");
  }
  Transition& tr = net.transitions[transition];
  if (!tr.condition) {
    throw Error("transition '" + tr.id + "' has no firing condition to update");
  }
  if (states.cols() != weights.size() || states.cols() == 0) {
    throw Error("need one weight per recorded state");
  }
  if (states.rows() != tr.condition->projection.size()) {
    throw Error("recorded states have wrong dimension for '" + tr.id + "'");
  }
  double total = weights.sum();
  if (!(total > 0.0)) throw Error("firing state weights must have positive sum");
  Eigen::VectorXd mean = states * (weights / total);
  tr.condition->threshold = tr.condition->projection.dot(mean);
  tr.lambda = tr.lambda_initial;
}

namespace {

void add_arc_indexed(Net& net, const std::string& from, const std::string& to) {
  int p = net.place_index(from);
  int t = net.transition_index(to);
  if (p >= 0 && t >= 0) {
    net.inputs[t].push_back(p);
    return;
  }
  t = net.transition_index(from);
  p = net.place_index(to);
  if (t >= 0 && p >= 0) {
    net.outputs[t].push_back(p);
    return;
  }
  throw Error("arc endpoints must be one existing place and one existing transition: '" + from +
              "' -> '" + to + "'");
}

}  // namespace

Net mutate_structure(const Net& net, const StructureEdit& edit) {
  Net out = net;
  std::visit(
      [&out](auto&& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, AddPlace>) {
          out.places.push_back({e.id});
          Marking m(out.places.size());
          m.head(out.initial_marking.size()) = out.initial_marking;
          m(m.size() - 1) = 0;
          out.initial_marking = m;
        } else if constexpr (std::is_same_v<E, DropPlace>) {
          int p = out.place_index(e.id);
          if (p < 0) throw Error("no place '" + e.id + "'");
          if (out.initial_marking(p) != 0) {
            throw Error("cannot drop marked place '" + e.id + "'");
          }
          for (size_t t = 0; t < out.transitions.size(); ++t) {
            auto& in = out.inputs[t];
            auto& outp = out.outputs[t];
            size_t nin = std::count(in.begin(), in.end(), p);
            size_t nout = std::count(outp.begin(), outp.end(), p);
            if (nin == in.size() || nout == outp.size()) {
              throw Error("dropping place '" + e.id + "' would disconnect transition '" +
                          out.transitions[t].id + "'");
            }
          }
          out.places.erase(out.places.begin() + p);
          Marking m(out.places.size());
          for (int i = 0, j = 0; i < out.initial_marking.size(); ++i) {
            if (i != p) m(j++) = out.initial_marking(i);
          }
          out.initial_marking = m;
          for (auto* lists : {&out.inputs, &out.outputs}) {
            for (auto& arcs : *lists) {
              std::erase(arcs, p);
              for (int& q : arcs) {
                if (q > p) --q;
              }
            }
          }
        } else if constexpr (std::is_same_v<E, AddTransition>) {
          Transition tr;
          tr.id = e.id;
          tr.lambda = e.lambda;
          tr.lambda_initial = e.lambda;
          tr.condition = e.condition;
          out.transitions.push_back(tr);
          out.inputs.emplace_back();
          out.outputs.emplace_back();
          for (const std::string& pid : e.input_places) {
            int p = out.place_index(pid);
            if (p < 0) throw Error("no place '" + pid + "'");
            out.inputs.back().push_back(p);
          }
          for (const std::string& pid : e.output_places) {
            int p = out.place_index(pid);
            if (p < 0) throw Error("no place '" + pid + "'");
            out.outputs.back().push_back(p);
          }
        } else if constexpr (std::is_same_v<E, DropTransition>) {
          int t = out.transition_index(e.id);
          if (t < 0) throw Error("no transition '" + e.id + "'");
          out.transitions.erase(out.transitions.begin() + t);
          out.inputs.erase(out.inputs.begin() + t);
          out.outputs.erase(out.outputs.begin() + t);
        } else if constexpr (std::is_same_v<E, AddArc>) {
          add_arc_indexed(out, e.from, e.to);
        } else if constexpr (std::is_same_v<E, DropArc>) {
          int p = out.place_index(e.from);
          int t = out.transition_index(e.to);
          if (p >= 0 && t >= 0) {
            auto& arcs = out.inputs[t];
            auto it = std::find(arcs.begin(), arcs.end(), p);
            if (it == arcs.end()) throw Error("no arc '" + e.from + "' -> '" + e.to + "'");
            arcs.erase(it);
            return;
          }
          t = out.transition_index(e.from);
          p = out.place_index(e.to);
          if (t >= 0 && p >= 0) {
            auto& arcs = out.outputs[t];
            auto it = std::find(arcs.begin(), arcs.end(), p);
            if (it == arcs.end()) throw Error("no arc '" + e.from + "' -> '" + e.to + "'");
            arcs.erase(it);
            return;
          }
          throw Error("no arc '" + e.from + "' -> '" + e.to + "'");
        }
      },
      edit);
  validate(out);
  return out;
}

Net parse_net(const std::string& text) {
  Net net;
  std::vector<std::string> lines = split(text, '\n');
  // First pass: declarations, so arcs and conditions can reference forward.
  struct Pending {
    int line;
    std::vector<std::string> tokens;
  };
  std::vector<Pending> arcs, conditions, markings;
  bool saw_marking = false;
  std::set<std::string> condition_seen, marking_seen;

  auto field = [](const std::string& token, const std::string& key, int lineno) {
    if (token.rfind(key + "=", 0) != 0) {
      throw ParseError("expected " + key + "=..., got '" + token + "'", lineno);
    }
    return token.substr(key.size() + 1);
  };

  for (size_t li = 0; li < lines.size(); ++li) {
    int lineno = static_cast<int>(li) + 1;
    std::string line = lines[li];
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::vector<std::string> tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& kind = tok[0];
    if (kind == "kappa") {
      if (tok.size() != 2) throw ParseError("kappa takes one value", lineno);
      net.kappa = parse_double_at(tok[1], lineno);
    } else if (kind == "lambda_floor") {
      if (tok.size() != 2) throw ParseError("lambda_floor takes one value", lineno);
      net.lambda_floor = parse_double_at(tok[1], lineno);
    } else if (kind == "place") {
      if (tok.size() != 2) throw ParseError("place takes one id", lineno);
      if (net.place_index(tok[1]) >= 0 || net.transition_index(tok[1]) >= 0) {
        throw ParseError("duplicate id '" + tok[1] + "'", lineno);
      }
      if (!valid_id(tok[1])) throw ParseError("bad place id '" + tok[1] + "'", lineno);
      net.places.push_back({tok[1]});
    } else if (kind == "transition") {
      if (tok.size() != 3) throw ParseError("expected: transition <id> lambda=<float>", lineno);
      if (net.place_index(tok[1]) >= 0 || net.transition_index(tok[1]) >= 0) {
        throw ParseError("duplicate id '" + tok[1] + "'", lineno);
      }
      if (!valid_id(tok[1])) throw ParseError("bad transition id '" + tok[1] + "'", lineno);
      Transition tr;
      tr.id = tok[1];
      tr.lambda = parse_double_at(field(tok[2], "lambda", lineno), lineno);
      if (!(tr.lambda >= 0.0 && tr.lambda <= 1.0)) {
        throw ParseError("lambda outside [0, 1]", lineno);
      }
      tr.lambda_initial = tr.lambda;
      net.transitions.push_back(tr);
      net.inputs.emplace_back();
      net.outputs.emplace_back();
    } else if (kind == "arc") {
      if (tok.size() != 4 || tok[2] != "->") {
        throw ParseError("expected: arc <from> -> <to>", lineno);
      }
      arcs.push_back({lineno, tok});
    } else if (kind == "condition") {
      if (tok.size() != 5) {
        throw ParseError("expected: condition <id> proj=<...> op=<ge|le> thresh=<float>", lineno);
      }
      conditions.push_back({lineno, tok});
    } else if (kind == "marking") {
      if (tok.size() != 3) throw ParseError("expected: marking <place> <tokens>", lineno);
      markings.push_back({lineno, tok});
      saw_marking = true;
    } else {
      throw ParseError("unknown directive '" + kind + "'", lineno);
    }
  }

  for (const Pending& c : conditions) {
    int t = net.transition_index(c.tokens[1]);
    if (t < 0) throw ParseError("unknown transition '" + c.tokens[1] + "'", c.line);
    if (!condition_seen.insert(c.tokens[1]).second) {
      throw ParseError("duplicate condition for '" + c.tokens[1] + "'", c.line);
    }
    FiringCondition fc;
    std::vector<std::string> parts = split(field(c.tokens[2], "proj", c.line), ',');
    fc.projection.resize(static_cast<int>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i) {
      fc.projection(static_cast<int>(i)) = parse_double_at(parts[i], c.line);
    }
    std::string op = field(c.tokens[3], "op", c.line);
    if (op == "ge") {
      fc.op = ConditionOp::ge;
    } else if (op == "le") {
      fc.op = ConditionOp::le;
    } else {
      throw ParseError("op must be ge or le, got '" + op + "'", c.line);
    }
    fc.threshold = parse_double_at(field(c.tokens[4], "thresh", c.line), c.line);
    net.transitions[t].condition = fc;
  }

  for (const Pending& a : arcs) {
    const std::string& from = a.tokens[1];
    const std::string& to = a.tokens[3];
    int p = net.place_index(from);
    int t = net.transition_index(to);
    if (p >= 0 && t >= 0) {
      net.inputs[t].push_back(p);
      continue;
    }
    t = net.transition_index(from);
    p = net.place_index(to);
    if (t >= 0 && p >= 0) {
      net.outputs[t].push_back(p);
      continue;
    }
    throw ParseError("arc references unknown id: '" + from + "' -> '" + to + "'", a.line);
  }

  net.initial_marking = Marking::Zero(static_cast<int>(net.places.size()));
  if (!saw_marking) throw Error("missing marking line");
  for (const Pending& m : markings) {
    int p = net.place_index(m.tokens[1]);
    if (p < 0) throw ParseError("unknown place '" + m.tokens[1] + "'", m.line);
    if (!marking_seen.insert(m.tokens[1]).second) {
      throw ParseError("duplicate marking for '" + m.tokens[1] + "'", m.line);
    }
    long tokens = parse_long_at(m.tokens[2], m.line);
    if (tokens < 0) throw ParseError("negative token count", m.line);
    net.initial_marking(p) = static_cast<int>(tokens);
  }

  validate(net);
  return net;
}

std::string serialize_net(const Net& net) {
  validate(net);
  std::string out;
  out += "kappa " + format_double(net.kappa) + "\n";
  out += "lambda_floor " + format_double(net.lambda_floor) + "\n";
  for (const Place& p : net.places) out += "place " + p.id + "\n";
  for (const Transition& t : net.transitions) {
    out += "transition " + t.id + " lambda=" + format_double(t.lambda) + "\n";
  }
  for (const Transition& t : net.transitions) {
    if (!t.condition) continue;
    out += "condition " + t.id + " proj=";
    for (int i = 0; i < t.condition->projection.size(); ++i) {
      if (i) out += ",";
      out += format_double(t.condition->projection(i));
    }
    out += " op=";
    out += (t.condition->op == ConditionOp::ge ? "ge" : "le");
    out += " thresh=" + format_double(t.condition->threshold) + "\n";
  }
  for (size_t t = 0; t < net.transitions.size(); ++t) {
    for (int p : net.inputs[t]) {
      out += "arc " + net.places[p].id + " -> " + net.transitions[t].id + "\n";
    }
    for (int p : net.outputs[t]) {
      out += "arc " + net.transitions[t].id + " -> " + net.places[p].id + "\n";
    }
  }
  for (int p = 0; p < net.initial_marking.size(); ++p) {
    if (net.initial_marking(p) != 0) {
      out += "marking " + net.places[p].id + " " + std::to_string(net.initial_marking(p)) + "\n";
    }
  }
  return out;
}

Net load_net(const std::string& path) {
  try {
    return parse_net(read_file(path));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " [" + path + "]");
  }
}

std::vector<int> terminal_places(const Net& net) {
  std::vector<bool> has_out(net.places.size(), false);
  for (const auto& arcs : net.inputs) {
    for (int p : arcs) has_out[p] = true;
  }
  std::vector<int> out;
  for (size_t p = 0; p < net.places.size(); ++p) {
    if (!has_out[p]) out.push_back(static_cast<int>(p));
  }
  return out;
}

bool is_stop_transition(const Net& net, int transition) {
  if (transition < 0 || transition >= static_cast<int>(net.transitions.size())) {
    throw Error("transition index out of range");
  }
  std::vector<int> term = terminal_places(net);
  for (int p : net.outputs[transition]) {
    if (std::find(term.begin(), term.end(), p) == term.end()) return false;
  }
  return !net.outputs[transition].empty();
}

}  // namespace cslearn::apn
