#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rforge::automaton {

using Word = std::vector<std::size_t>;       // input symbol indices
using StateSet = std::vector<std::size_t>;   // sorted state indices

// Finite Moore machine. The experiment ensemble is the set of admissible
// initial states (all states unless restricted).
class MooreAutomaton {
public:
  MooreAutomaton(std::vector<std::string> states, std::vector<std::string> inputs, std::vector<std::string> outputs,
                 std::vector<std::vector<std::size_t>> delta, std::vector<std::size_t> omega,
                 std::vector<std::size_t> initial = {});

  const std::vector<std::string>& states() const { return states_; }
  const std::vector<std::string>& inputs() const { return inputs_; }
  const std::vector<std::string>& outputs() const { return outputs_; }
  const StateSet& ensemble() const { return initial_; }

  std::size_t next(std::size_t state, std::size_t input) const { return delta_[state][input]; }
  std::size_t output(std::size_t state) const { return omega_[state]; }

  std::size_t state_index(std::string_view name) const;   // UnknownState
  std::size_t input_index(std::string_view name) const;   // UnknownSymbol
  std::size_t output_index(std::string_view name) const;  // UnknownSymbol

private:
  std::vector<std::string> states_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::vector<std::size_t>> delta_;
  std::vector<std::size_t> omega_;
  StateSet initial_;
};

// Comma-separated input symbols; the empty string is the empty word.
Word parse_word(const MooreAutomaton& m, std::string_view text);

// Moore convention: |w| + 1 outputs, starting with omega(s0).
std::vector<std::size_t> run_experiment(const MooreAutomaton& m, const Word& w, std::size_t s0);

struct StatePartition {
  Word experiment;
  std::vector<StateSet> cells;  // ordered by smallest member
};

// Groups the ensemble by output word.
StatePartition experiment_partition(const MooreAutomaton& m, const Word& w);

// Every cell of `fine` lies inside a cell of `coarse`.
bool refines(const StatePartition& fine, const StatePartition& coarse);

enum class LogicMode { all_cells, designated };
LogicMode parse_logic_mode(std::string_view name);
std::string_view to_string(LogicMode mode);

// Decides whether a cell's output word counts as verified (designated mode).
using OutputPredicate = std::function<bool(const std::vector<std::size_t>&)>;

struct PropositionPoset {
  std::vector<StateSet> elements;                            // by size, then lexicographic
  std::vector<std::pair<std::size_t, std::size_t>> hasse;    // covering pairs (lower, upper)
};

PropositionPoset property_logic(const MooreAutomaton& m, std::size_t max_len, LogicMode mode,
                                const OutputPredicate& verified = {});

// Builds the poset (inclusion order, Hasse diagram) over the given subsets.
PropositionPoset make_poset(std::vector<StateSet> elements);

// Neither experiment refines the other, and running either one first destroys
// the distinctions of the other.
bool is_complementary(const MooreAutomaton& m, const Word& w1, const Word& w2);

// Presets: "toggler", "hit_detector", "finkelstein".
MooreAutomaton toggler();
MooreAutomaton hit_detector();
MooreAutomaton finkelstein();
MooreAutomaton preset(std::string_view name);  // ConfigError

// {states, inputs, outputs, delta: {state: {input: state}}, omega: {state: output}, initial?}
MooreAutomaton automaton_from_json(std::string_view text);
std::string automaton_to_json(const MooreAutomaton& m);
std::string poset_to_json(const MooreAutomaton& m, const PropositionPoset& p);

}  // namespace rforge::automaton
