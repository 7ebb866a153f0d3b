#ifndef PALAB_GAME_HPP
#define PALAB_GAME_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace palab {

// Absolute tolerance for every utility comparison.  Exact ties matter in the
// fixtures (e.g. the contract that equally incentivizes two actions), so all
// modules share this one convention.
constexpr double kTieTolerance = 1e-9;

// A forecast is a probability vector over states of nature.
using Forecast = std::vector<double>;

bool forecast_valid(const Forecast& pi);

// A policy is a flat parameter vector:
//   - linear contract: {p}, the agent's revenue share;
//   - signal scheme: row-major |Y| x n conditional matrix p(signal|state);
//   - tabular game: {index into the game's policy table}.
struct Policy {
  std::vector<double> params;

  bool operator==(const Policy& o) const { return params == o.params; }
};

// Interns policies and assigns dense ids in first-appearance order, so that
// transcripts, context keys and event labels agree across a run and its
// counterfactual replays.
class PolicyRegistry {
 public:
  int intern(const Policy& p);
  const Policy& at(int id) const { return policies_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(policies_.size()); }

 private:
  static std::vector<std::int64_t> key(const Policy& p);
  std::vector<Policy> policies_;
  std::map<std::vector<std::int64_t>, int> index_;
};

// Finite principal-agent stage game: per-state utilities for both sides as a
// function of (action, policy, state), plus the benchmark policy set.
class Game {
 public:
  virtual ~Game() = default;
  virtual int num_actions() const = 0;
  virtual int num_states() const = 0;
  // U(a, p, y): agent's utility.
  virtual double agent_payoff(int action, const Policy& policy, int state) const = 0;
  // V(a, p, y): principal's utility.
  virtual double principal_payoff(int action, const Policy& policy, int state) const = 0;
  virtual const std::vector<Policy>& benchmarks() const = 0;
  virtual std::string kind() const = 0;
};

// Linear contract game: the principal pays the agent a p-fraction of the
// realized outcome value.  U(a,p,y) = p*value(o(a,y)) - cost(a),
// V(a,p,y) = (1-p)*value(o(a,y)).
class LinearContractGame : public Game {
 public:
  LinearContractGame(std::vector<std::string> action_names, std::vector<double> costs,
                     std::vector<double> outcome_values,
                     std::vector<std::vector<int>> outcome_of,  // [action][state] -> outcome
                     std::vector<double> benchmark_contracts,
                     std::vector<std::string> state_names = {});

  int num_actions() const override { return static_cast<int>(costs_.size()); }
  int num_states() const override { return num_states_; }
  double agent_payoff(int a, const Policy& p, int y) const override;
  double principal_payoff(int a, const Policy& p, int y) const override;
  const std::vector<Policy>& benchmarks() const override { return benchmarks_; }
  std::string kind() const override { return "linear"; }

  // Expected outcome value f(pi, a) = E_{y~pi}[value(o(a,y))], for all actions
  // at once (the oracle scans contract grids against a fixed forecast).
  std::vector<double> expected_outcome_values(const Forecast& pi) const;
  double cost(int a) const { return costs_[static_cast<std::size_t>(a)]; }
  double min_cost_gap() const { return delta_c_; }
  double outcome_value(int a, int y) const {
    return values_[static_cast<std::size_t>(outcome_of_[static_cast<std::size_t>(a)][static_cast<std::size_t>(y)])];
  }
  const std::vector<std::string>& action_names() const { return action_names_; }
  const std::vector<std::string>& state_names() const { return state_names_; }

 private:
  std::vector<std::string> action_names_;
  std::vector<std::string> state_names_;
  std::vector<double> costs_;
  std::vector<double> values_;
  std::vector<std::vector<int>> outcome_of_;
  std::vector<Policy> benchmarks_;
  int num_states_ = 0;
  double delta_c_ = 0.0;
};

// Binary-state persuasion game.  A policy is a signal scheme p(s|y) whose
// signals coincide with the receiver strategies.  An *action* for the agent is
// a full map from signals to strategies, encoded base-n: action a plays
// strategy (a / n^s) % n on signal s.  Utilities are expectations over the
// signal drawn by the scheme in the realized state:
//   U(a, scheme, y) = sum_s p(s|y) * u(a(s), y)
//   V(a, scheme, y) = sum_s p(s|y) * v(a(s)).
class PersuasionGame : public Game {
 public:
  PersuasionGame(std::vector<std::string> strategy_names,
                 std::vector<std::vector<double>> agent_utility,  // [strategy][state], state in {0,1}
                 std::vector<double> principal_value, std::vector<Policy> benchmark_schemes);

  int num_actions() const override { return num_actions_; }
  int num_states() const override { return 2; }
  double agent_payoff(int a, const Policy& p, int y) const override;
  double principal_payoff(int a, const Policy& p, int y) const override;
  const std::vector<Policy>& benchmarks() const override { return benchmarks_; }
  std::string kind() const override { return "persuasion"; }

  int num_strategies() const { return n_; }
  int map_strategy(int action, int signal) const;  // decode the base-n digit
  int identity_action() const;                     // the map sending each signal to itself
  double strategy_agent_utility(int s, int y) const {
    return u_[static_cast<std::size_t>(s)][static_cast<std::size_t>(y)];
  }
  double strategy_principal_value(int s) const { return v_[static_cast<std::size_t>(s)]; }
  const std::vector<std::string>& strategy_names() const { return names_; }

  // Uninformative scheme: every state sends the same single signal.
  Policy no_info_scheme(int signal) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> u_;
  std::vector<double> v_;
  std::vector<Policy> benchmarks_;
  int n_ = 0;
  int num_actions_ = 0;
};

// Small explicit game for fixtures: U and V given as [action][policy][state]
// tables; the policy parameter is the table index.
class TabularGame : public Game {
 public:
  TabularGame(std::vector<std::vector<std::vector<double>>> u,
              std::vector<std::vector<std::vector<double>>> v, std::vector<int> benchmark_indices);

  int num_actions() const override { return static_cast<int>(u_.size()); }
  int num_states() const override { return num_states_; }
  double agent_payoff(int a, const Policy& p, int y) const override;
  double principal_payoff(int a, const Policy& p, int y) const override;
  const std::vector<Policy>& benchmarks() const override { return benchmarks_; }
  std::string kind() const override { return "tabular"; }
  int num_policies() const { return num_policies_; }
  Policy policy(int index) const { return Policy{{static_cast<double>(index)}}; }

 private:
  std::vector<std::vector<std::vector<double>>> u_, v_;
  std::vector<Policy> benchmarks_;
  int num_states_ = 0;
  int num_policies_ = 0;
};

// E_{y~pi}[U(a,p,y)] and E_{y~pi}[V(a,p,y)].
std::pair<double, double> expected_utilities(const Game& game, int action, const Policy& policy,
                                             const Forecast& pi);

// All actions within eps of the best expected agent utility (tolerance
// kTieTolerance on the comparison).
std::vector<int> best_response_set(const Game& game, const Policy& policy, const Forecast& pi,
                                   double eps);

// The principal-preferred member of the eps-best-response set; ties broken by
// lowest action index.
int optimistic_best_response(const Game& game, const Policy& policy, const Forecast& pi,
                             double eps);

// Benchmark policy maximizing V(a*(p,pi), p, pi); ties keep the first-declared
// benchmark.  Returns the index into game.benchmarks().
int principal_best_policy_index(const Game& game, const Forecast& pi);

}  // namespace palab

#endif
