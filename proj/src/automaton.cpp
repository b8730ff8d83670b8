#include "rforge/automaton.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "rforge/error.hpp"

namespace rforge::automaton {

namespace {

std::size_t find_name(const std::vector<std::string>& names, std::string_view name) {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? names.size() : static_cast<std::size_t>(it - names.begin());
}

void require_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second) throw ConfigError(std::string("duplicate ") + what + " '" + n + "'");
}

}  // namespace

MooreAutomaton::MooreAutomaton(std::vector<std::string> states, std::vector<std::string> inputs,
                               std::vector<std::string> outputs, std::vector<std::vector<std::size_t>> delta,
                               std::vector<std::size_t> omega, std::vector<std::size_t> initial)
    : states_(std::move(states)),
      inputs_(std::move(inputs)),
      outputs_(std::move(outputs)),
      delta_(std::move(delta)),
      omega_(std::move(omega)),
      initial_(std::move(initial)) {
  if (states_.empty()) throw ConfigError("automaton needs at least one state");
  if (outputs_.empty()) throw ConfigError("automaton needs at least one output symbol");
  require_unique(states_, "state");
  require_unique(inputs_, "input symbol");
  require_unique(outputs_, "output symbol");
  if (delta_.size() != states_.size() || omega_.size() != states_.size())
    throw ConfigError("delta and omega must be defined for every state");
  for (const auto& row : delta_) {
    if (row.size() != inputs_.size()) throw ConfigError("delta must be defined for every input symbol");
    for (auto s : row)
      if (s >= states_.size()) throw UnknownState("delta targets a state outside the automaton");
  }
  for (auto o : omega_)
    if (o >= outputs_.size()) throw UnknownSymbol("omega maps to an unknown output symbol");
  if (initial_.empty())
    for (std::size_t s = 0; s < states_.size(); ++s) initial_.push_back(s);
  std::sort(initial_.begin(), initial_.end());
  initial_.erase(std::unique(initial_.begin(), initial_.end()), initial_.end());
  if (initial_.back() >= states_.size()) throw UnknownState("initial state outside the automaton");
}

std::size_t MooreAutomaton::state_index(std::string_view name) const {
  const auto i = find_name(states_, name);
  if (i == states_.size()) throw UnknownState("unknown state '" + std::string(name) + "'");
  return i;
}

std::size_t MooreAutomaton::input_index(std::string_view name) const {
  const auto i = find_name(inputs_, name);
  if (i == inputs_.size()) throw UnknownSymbol("unknown input symbol '" + std::string(name) + "'");
  return i;
}

std::size_t MooreAutomaton::output_index(std::string_view name) const {
  const auto i = find_name(outputs_, name);
  if (i == outputs_.size()) throw UnknownSymbol("unknown output symbol '" + std::string(name) + "'");
  return i;
}

Word parse_word(const MooreAutomaton& m, std::string_view text) {
  Word w;
  if (text.empty()) return w;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    const auto token = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    w.push_back(m.input_index(token));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return w;
}

std::vector<std::size_t> run_experiment(const MooreAutomaton& m, const Word& w, std::size_t s0) {
  if (s0 >= m.states().size()) throw UnknownState("initial state index out of range");
  for (auto x : w)
    if (x >= m.inputs().size()) throw UnknownSymbol("input symbol index out of range");
  std::vector<std::size_t> out;
  out.reserve(w.size() + 1);
  std::size_t s = s0;
  out.push_back(m.output(s));
  for (auto x : w) {
    s = m.next(s, x);
    out.push_back(m.output(s));
  }
  return out;
}

StatePartition experiment_partition(const MooreAutomaton& m, const Word& w) {
  std::map<std::vector<std::size_t>, StateSet> groups;
  for (auto s : m.ensemble()) groups[run_experiment(m, w, s)].push_back(s);
  StatePartition p{w, {}};
  for (auto& [out, cell] : groups) p.cells.push_back(std::move(cell));
  std::sort(p.cells.begin(), p.cells.end());
  return p;
}

bool refines(const StatePartition& fine, const StatePartition& coarse) {
  std::map<std::size_t, std::size_t> cell_of;
  for (std::size_t c = 0; c < coarse.cells.size(); ++c)
    for (auto s : coarse.cells[c]) cell_of[s] = c;
  for (const auto& cell : fine.cells) {
    const auto first = cell_of.find(cell.front());
    if (first == cell_of.end()) return false;
    for (auto s : cell) {
      const auto it = cell_of.find(s);
      if (it == cell_of.end() || it->second != first->second) return false;
    }
  }
  return true;
}

LogicMode parse_logic_mode(std::string_view name) {
  if (name == "all_cells") return LogicMode::all_cells;
  if (name == "designated") return LogicMode::designated;
  throw ConfigError("unknown logic mode '" + std::string(name) + "'");
}

std::string_view to_string(LogicMode mode) { return mode == LogicMode::all_cells ? "all_cells" : "designated"; }

namespace {

bool subset_of(const StateSet& a, const StateSet& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }

bool poset_less(const StateSet& a, const StateSet& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

constexpr std::size_t kMaxUnionCells = 20;

}  // namespace

PropositionPoset make_poset(std::vector<StateSet> elements) {
  for (auto& e : elements) std::sort(e.begin(), e.end());
  std::sort(elements.begin(), elements.end(), poset_less);
  elements.erase(std::unique(elements.begin(), elements.end()), elements.end());

  PropositionPoset p;
  p.elements = std::move(elements);
  const auto n = p.elements.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p.elements[i].size() >= p.elements[j].size() || !subset_of(p.elements[i], p.elements[j])) continue;
      bool covered = true;
      for (std::size_t k = 0; k < n && covered; ++k) {
        if (k == i || k == j) continue;
        const auto& mid = p.elements[k];
        if (mid.size() > p.elements[i].size() && mid.size() < p.elements[j].size() &&
            subset_of(p.elements[i], mid) && subset_of(mid, p.elements[j]))
          covered = false;
      }
      if (covered) p.hasse.emplace_back(i, j);
    }
  return p;
}

PropositionPoset property_logic(const MooreAutomaton& m, std::size_t max_len, LogicMode mode,
                                const OutputPredicate& verified) {
  if (mode == LogicMode::designated && !verified) throw ConfigError("designated mode needs an output predicate");
  std::vector<StateSet> elements{StateSet{}, m.ensemble()};
  const std::size_t k = m.inputs().size();

  for (std::size_t len = 0; len <= max_len; ++len) {
    if (len > 0 && k == 0) break;
    Word w(len, 0);
    while (true) {
      const auto part = experiment_partition(m, w);
      if (mode == LogicMode::all_cells) {
        const auto c = part.cells.size();
        if (c > kMaxUnionCells) throw ConfigError("partition has too many cells to enumerate unions");
        for (std::size_t mask = 1; mask < (std::size_t{1} << c); ++mask) {
          StateSet u;
          for (std::size_t i = 0; i < c; ++i)
            if (mask >> i & 1U) u.insert(u.end(), part.cells[i].begin(), part.cells[i].end());
          elements.push_back(std::move(u));
        }
      } else {
        for (const auto& cell : part.cells)
          if (verified(run_experiment(m, w, cell.front()))) elements.push_back(cell);
      }
      // Next word in lexicographic order.
      std::size_t pos = len;
      while (pos > 0 && ++w[pos - 1] == k) w[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return make_poset(std::move(elements));
}

bool is_complementary(const MooreAutomaton& m, const Word& w1, const Word& w2) {
  const auto p1 = experiment_partition(m, w1);
  const auto p2 = experiment_partition(m, w2);
  if (refines(p1, p2) || refines(p2, p1)) return false;
  Word w12 = w1, w21 = w2;
  w12.insert(w12.end(), w2.begin(), w2.end());
  w21.insert(w21.end(), w1.begin(), w1.end());
  return !refines(experiment_partition(m, w12), p2) && !refines(experiment_partition(m, w21), p1);
}

// ---------------------------------------------------------------------------
// Presets

MooreAutomaton toggler() {
  return MooreAutomaton({"0", "1"}, {"a"}, {"0", "1"}, {{1}, {0}}, {0, 1});
}

namespace {

// Four vertices 1..4, each with plain/hit/miss variants; probes 1..4.
// `move(v, k)` gives the vertex (0-based) after probing vertex v with k.
template <class Move>
MooreAutomaton probe_automaton(Move move) {
  std::vector<std::string> states;
  for (int v = 1; v <= 4; ++v) states.push_back(std::to_string(v));
  for (int v = 1; v <= 4; ++v) {
    states.push_back(std::to_string(v) + "/hit");
    states.push_back(std::to_string(v) + "/miss");
  }
  auto vertex = [](std::size_t s) { return s < 4 ? s : (s - 4) / 2; };
  auto flagged = [](std::size_t v, bool hit) { return 4 + 2 * v + (hit ? 0 : 1); };

  std::vector<std::vector<std::size_t>> delta(states.size(), std::vector<std::size_t>(4));
  std::vector<std::size_t> omega(states.size());
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto v = vertex(s);
    for (std::size_t k = 0; k < 4; ++k) delta[s][k] = flagged(move(v, k), v == k);
    omega[s] = s < 4 ? 0 : ((s - 4) % 2 == 0 ? 1 : 2);
  }
  return MooreAutomaton(std::move(states), {"1", "2", "3", "4"}, {"none", "hit", "miss"}, std::move(delta),
                        std::move(omega), {0, 1, 2, 3});
}

}  // namespace

MooreAutomaton hit_detector() {
  return probe_automaton([](std::size_t v, std::size_t) { return v; });
}

MooreAutomaton finkelstein() {
  // Probing pushes the state one step around the square 1-2-3-4-1.
  return probe_automaton([](std::size_t v, std::size_t) { return (v + 1) % 4; });
}

MooreAutomaton preset(std::string_view name) {
  if (name == "toggler") return toggler();
  if (name == "hit_detector") return hit_detector();
  if (name == "finkelstein") return finkelstein();
  throw ConfigError("unknown automaton preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// JSON

MooreAutomaton automaton_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    auto states = j.at("states").get<std::vector<std::string>>();
    auto inputs = j.at("inputs").get<std::vector<std::string>>();
    auto outputs = j.at("outputs").get<std::vector<std::string>>();
    auto index = [](const std::vector<std::string>& names, const std::string& name, bool state) {
      const auto i = find_name(names, name);
      if (i == names.size()) {
        if (state) throw UnknownState("unknown state '" + name + "'");
        throw UnknownSymbol("unknown symbol '" + name + "'");
      }
      return i;
    };
    std::vector<std::vector<std::size_t>> delta(states.size(), std::vector<std::size_t>(inputs.size()));
    std::vector<std::size_t> omega(states.size());
    const auto& jd = j.at("delta");
    const auto& jo = j.at("omega");
    for (std::size_t s = 0; s < states.size(); ++s) {
      const auto& row = jd.at(states[s]);
      if (row.size() != inputs.size()) throw ConfigError("delta row for '" + states[s] + "' is not total");
      for (std::size_t x = 0; x < inputs.size(); ++x)
        delta[s][x] = index(states, row.at(inputs[x]).get<std::string>(), true);
      omega[s] = index(outputs, jo.at(states[s]).get<std::string>(), false);
    }
    std::vector<std::size_t> initial;
    if (j.contains("initial"))
      for (const auto& name : j.at("initial")) initial.push_back(index(states, name.get<std::string>(), true));
    return MooreAutomaton(std::move(states), std::move(inputs), std::move(outputs), std::move(delta),
                          std::move(omega), std::move(initial));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed automaton JSON: ") + e.what());
  }
}

std::string automaton_to_json(const MooreAutomaton& m) {
  nlohmann::ordered_json j;
  j["states"] = m.states();
  j["inputs"] = m.inputs();
  j["outputs"] = m.outputs();
  nlohmann::ordered_json delta = nlohmann::ordered_json::object();
  nlohmann::ordered_json omega = nlohmann::ordered_json::object();
  for (std::size_t s = 0; s < m.states().size(); ++s) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t x = 0; x < m.inputs().size(); ++x) row[m.inputs()[x]] = m.states()[m.next(s, x)];
    delta[m.states()[s]] = std::move(row);
    omega[m.states()[s]] = m.outputs()[m.output(s)];
  }
  j["delta"] = std::move(delta);
  j["omega"] = std::move(omega);
  std::vector<std::string> initial;
  for (auto s : m.ensemble()) initial.push_back(m.states()[s]);
  j["initial"] = initial;
  return j.dump(2) + "\n";
}

std::string poset_to_json(const MooreAutomaton& m, const PropositionPoset& p) {
  nlohmann::ordered_json j;
  auto elements = nlohmann::ordered_json::array();
  for (const auto& e : p.elements) {
    std::vector<std::string> names;
    for (auto s : e) names.push_back(m.states()[s]);
    elements.push_back(names);
  }
  j["elements"] = std::move(elements);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [lo, hi] : p.hasse) edges.push_back({lo, hi});
  j["hasse_edges"] = std::move(edges);
  return j.dump() + "\n";
}

}  // namespace rforge::automaton
