#include "palab/game.hpp"

#include <algorithm>
#include <cmath>

namespace palab {

bool forecast_valid(const Forecast& pi) {
  if (pi.empty()) return false;
  double sum = 0.0;
  for (double x : pi) {
    if (!(x >= -1e-12 && x <= 1.0 + 1e-12)) return false;
    sum += x;
  }
  return std::abs(sum - 1.0) <= 1e-12 * std::max(1.0, sum) + 1e-12;
}

std::vector<std::int64_t> PolicyRegistry::key(const Policy& p) {
  std::vector<std::int64_t> k;
  k.reserve(p.params.size());
  for (double x : p.params) k.push_back(std::llround(x * 1e12));
  return k;
}

int PolicyRegistry::intern(const Policy& p) {
  auto k = key(p);
  auto it = index_.find(k);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(policies_.size());
  policies_.push_back(p);
  index_.emplace(std::move(k), id);
  return id;
}

LinearContractGame::LinearContractGame(std::vector<std::string> action_names,
                                       std::vector<double> costs, std::vector<double> outcome_values,
                                       std::vector<std::vector<int>> outcome_of,
                                       std::vector<double> benchmark_contracts,
                                       std::vector<std::string> state_names)
    : action_names_(std::move(action_names)),
      state_names_(std::move(state_names)),
      costs_(std::move(costs)),
      values_(std::move(outcome_values)),
      outcome_of_(std::move(outcome_of)) {
  if (costs_.empty() || outcome_of_.size() != costs_.size())
    throw std::invalid_argument("linear game: actions and outcome map must align");
  num_states_ = static_cast<int>(outcome_of_.front().size());
  for (const auto& row : outcome_of_) {
    if (static_cast<int>(row.size()) != num_states_)
      throw std::invalid_argument("linear game: ragged outcome map");
    for (int o : row)
      if (o < 0 || o >= static_cast<int>(values_.size()))
        throw std::invalid_argument("linear game: outcome index out of range");
  }
  if (action_names_.empty())
    for (std::size_t i = 0; i < costs_.size(); ++i) action_names_.push_back("a" + std::to_string(i));
  if (state_names_.empty())
    for (int y = 0; y < num_states_; ++y) state_names_.push_back("y" + std::to_string(y));
  // distinct costs are required so that contract ties are isolated points
  delta_c_ = 1e300;
  for (std::size_t i = 0; i < costs_.size(); ++i)
    for (std::size_t j = i + 1; j < costs_.size(); ++j)
      delta_c_ = std::min(delta_c_, std::abs(costs_[i] - costs_[j]));
  if (costs_.size() == 1) delta_c_ = 1.0;
  if (delta_c_ <= 0.0) throw std::invalid_argument("linear game: action costs must be pairwise distinct");
  for (double p : benchmark_contracts) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("linear game: benchmark contract outside [0,1]");
    benchmarks_.push_back(Policy{{p}});
  }
}

double LinearContractGame::agent_payoff(int a, const Policy& p, int y) const {
  return p.params.at(0) * outcome_value(a, y) - costs_[static_cast<std::size_t>(a)];
}

double LinearContractGame::principal_payoff(int a, const Policy& p, int y) const {
  return (1.0 - p.params.at(0)) * outcome_value(a, y);
}

std::vector<double> LinearContractGame::expected_outcome_values(const Forecast& pi) const {
  std::vector<double> f(costs_.size(), 0.0);
  for (std::size_t a = 0; a < costs_.size(); ++a)
    for (int y = 0; y < num_states_; ++y)
      f[a] += pi[static_cast<std::size_t>(y)] * outcome_value(static_cast<int>(a), y);
  return f;
}

PersuasionGame::PersuasionGame(std::vector<std::string> strategy_names,
                               std::vector<std::vector<double>> agent_utility,
                               std::vector<double> principal_value,
                               std::vector<Policy> benchmark_schemes)
    : names_(std::move(strategy_names)),
      u_(std::move(agent_utility)),
      v_(std::move(principal_value)),
      benchmarks_(std::move(benchmark_schemes)) {
  n_ = static_cast<int>(u_.size());
  if (n_ < 1 || v_.size() != u_.size())
    throw std::invalid_argument("persuasion game: strategy tables must align");
  for (const auto& row : u_)
    if (row.size() != 2) throw std::invalid_argument("persuasion game: binary states required");
  if (names_.empty())
    for (int s = 0; s < n_; ++s) names_.push_back("s" + std::to_string(s));
  num_actions_ = 1;
  for (int s = 0; s < n_; ++s) {
    if (num_actions_ > (1 << 20) / n_)
      throw std::invalid_argument("persuasion game: too many signal-to-strategy maps");
    num_actions_ *= n_;
  }
  for (const auto& b : benchmarks_)
    if (static_cast<int>(b.params.size()) != 2 * n_)
      throw std::invalid_argument("persuasion game: benchmark scheme has wrong shape");
}

int PersuasionGame::map_strategy(int action, int signal) const {
  int x = action;
  for (int s = 0; s < signal; ++s) x /= n_;
  return x % n_;
}

int PersuasionGame::identity_action() const {
  int a = 0, b = 1;
  for (int s = 0; s < n_; ++s) {
    a += s * b;
    b *= n_;
  }
  return a;
}

Policy PersuasionGame::no_info_scheme(int signal) const {
  Policy p;
  p.params.assign(static_cast<std::size_t>(2 * n_), 0.0);
  p.params[static_cast<std::size_t>(signal)] = 1.0;
  p.params[static_cast<std::size_t>(n_ + signal)] = 1.0;
  return p;
}

double PersuasionGame::agent_payoff(int a, const Policy& p, int y) const {
  double total = 0.0;
  for (int s = 0; s < n_; ++s)
    total += p.params[static_cast<std::size_t>(y * n_ + s)] *
             u_[static_cast<std::size_t>(map_strategy(a, s))][static_cast<std::size_t>(y)];
  return total;
}

double PersuasionGame::principal_payoff(int a, const Policy& p, int y) const {
  double total = 0.0;
  for (int s = 0; s < n_; ++s)
    total += p.params[static_cast<std::size_t>(y * n_ + s)] *
             v_[static_cast<std::size_t>(map_strategy(a, s))];
  return total;
}

TabularGame::TabularGame(std::vector<std::vector<std::vector<double>>> u,
                         std::vector<std::vector<std::vector<double>>> v,
                         std::vector<int> benchmark_indices)
    : u_(std::move(u)), v_(std::move(v)) {
  if (u_.empty() || v_.size() != u_.size())
    throw std::invalid_argument("tabular game: tables must align");
  num_policies_ = static_cast<int>(u_.front().size());
  num_states_ = static_cast<int>(u_.front().front().size());
  for (int i : benchmark_indices) {
    if (i < 0 || i >= num_policies_)
      throw std::invalid_argument("tabular game: benchmark index out of range");
    benchmarks_.push_back(Policy{{static_cast<double>(i)}});
  }
}

double TabularGame::agent_payoff(int a, const Policy& p, int y) const {
  int idx = static_cast<int>(std::llround(p.params.at(0)));
  return u_.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(idx)).at(static_cast<std::size_t>(y));
}

double TabularGame::principal_payoff(int a, const Policy& p, int y) const {
  int idx = static_cast<int>(std::llround(p.params.at(0)));
  return v_.at(static_cast<std::size_t>(a)).at(static_cast<std::size_t>(idx)).at(static_cast<std::size_t>(y));
}

std::pair<double, double> expected_utilities(const Game& game, int action, const Policy& policy,
                                             const Forecast& pi) {
  if (action < 0 || action >= game.num_actions()) throw std::domain_error("action index out of range");
  if (static_cast<int>(pi.size()) != game.num_states())
    throw std::domain_error("forecast length does not match the state space");
  double u = 0.0, v = 0.0;
  for (int y = 0; y < game.num_states(); ++y) {
    double w = pi[static_cast<std::size_t>(y)];
    if (w == 0.0) continue;
    u += w * game.agent_payoff(action, policy, y);
    v += w * game.principal_payoff(action, policy, y);
  }
  return {u, v};
}

std::vector<int> best_response_set(const Game& game, const Policy& policy, const Forecast& pi,
                                   double eps) {
  const int na = game.num_actions();
  std::vector<double> u(static_cast<std::size_t>(na));
  double best = -1e300;
  for (int a = 0; a < na; ++a) {
    u[static_cast<std::size_t>(a)] = expected_utilities(game, a, policy, pi).first;
    best = std::max(best, u[static_cast<std::size_t>(a)]);
  }
  std::vector<int> out;
  for (int a = 0; a < na; ++a)
    if (u[static_cast<std::size_t>(a)] >= best - eps - kTieTolerance) out.push_back(a);
  return out;
}

int optimistic_best_response(const Game& game, const Policy& policy, const Forecast& pi,
                             double eps) {
  auto set = best_response_set(game, policy, pi, eps);
  int best_a = set.front();
  double best_v = expected_utilities(game, best_a, policy, pi).second;
  for (std::size_t i = 1; i < set.size(); ++i) {
    double v = expected_utilities(game, set[i], policy, pi).second;
    if (v > best_v + kTieTolerance) {
      best_v = v;
      best_a = set[i];
    }
  }
  return best_a;
}

int principal_best_policy_index(const Game& game, const Forecast& pi) {
  const auto& bench = game.benchmarks();
  if (bench.empty()) throw std::domain_error("benchmark policy set is empty");
  int best_i = 0;
  double best_v = -1e300;
  for (std::size_t i = 0; i < bench.size(); ++i) {
    int a = optimistic_best_response(game, bench[i], pi, 0.0);
    double v = expected_utilities(game, a, bench[i], pi).second;
    if (v > best_v + kTieTolerance) {
      best_v = v;
      best_i = static_cast<int>(i);
    }
  }
  return best_i;
}

}  // namespace palab
