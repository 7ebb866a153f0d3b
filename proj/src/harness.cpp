#include "palab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "palab/rng.hpp"

namespace palab {

namespace {

void check_benchmark_index(const Game& game, int index) {
  if (index < 0 || index >= static_cast<int>(game.benchmarks().size()))
    throw std::invalid_argument("benchmark index " + std::to_string(index) +
                                " outside the declared benchmark set");
}

void check_action(const Game& game, int action, const char* what) {
  if (action < 0 || action >= game.num_actions())
    throw std::invalid_argument(std::string(what) + " " + std::to_string(action) +
                                " outside the action set");
}

}  // namespace

// ---------------------------------------------------------------------------
// Mechanisms
// ---------------------------------------------------------------------------

ConstantMechanism::ConstantMechanism(const Game& game, int benchmark_index)
    : game_(&game), benchmark_(benchmark_index) {
  check_benchmark_index(game, benchmark_index);
}

Decision ConstantMechanism::decide(const Forecast& pi) const {
  const Policy& p = game_->benchmarks()[static_cast<std::size_t>(benchmark_)];
  return {p, optimistic_best_response(*game_, p, pi, 0.0)};
}

ConstantPairMechanism::ConstantPairMechanism(const Game& game, int benchmark_index,
                                             int recommendation)
    : game_(&game), benchmark_(benchmark_index), recommendation_(recommendation) {
  check_benchmark_index(game, benchmark_index);
  check_action(game, recommendation, "recommendation");
}

Decision ConstantPairMechanism::decide(const Forecast&) const {
  return {game_->benchmarks()[static_cast<std::size_t>(benchmark_)], recommendation_};
}

Decision BenchmarkBestMechanism::decide(const Forecast& pi) const {
  int k = principal_best_policy_index(*game_, pi);
  const Policy& p = game_->benchmarks()[static_cast<std::size_t>(k)];
  return {p, optimistic_best_response(*game_, p, pi, 0.0)};
}

LinearOracleMechanism::LinearOracleMechanism(const LinearContractGame& game,
                                             LinearOracleParams params)
    : game_(&game), params_(params) {
  params_.validate();
}

Decision LinearOracleMechanism::decide(const Forecast& pi) const {
  LinearOracleResult res = linear_stable_oracle(*game_, pi, params_);
  Policy p{{res.contract}};
  return {p, optimistic_best_response(*game_, p, pi, 0.0)};
}

double LinearOracleMechanism::optimism() const { return params_.eps(*game_); }

PersuasionOracleMechanism::PersuasionOracleMechanism(const PersuasionGame& game,
                                                     PersuasionOracleParams params,
                                                     double optimism_eps)
    : game_(&game), params_(params), optimism_(optimism_eps) {
  params_.validate();
  if (optimism_eps < 0.0) throw std::invalid_argument("optimism level must be nonnegative");
}

Decision PersuasionOracleMechanism::decide(const Forecast& pi) const {
  PersuasionOracleResult res = persuasion_stable_oracle(*game_, pi[1], params_);
  Policy p = res.scheme.to_policy();
  return {p, optimistic_best_response(*game_, p, pi, 0.0)};
}

// ---------------------------------------------------------------------------
// State generators
// ---------------------------------------------------------------------------

FixedSequenceStates::FixedSequenceStates(std::vector<int> states) : states_(std::move(states)) {
  if (states_.empty()) throw std::invalid_argument("fixed state sequence is empty");
}

int FixedSequenceStates::next(const Forecast&) {
  if (pos_ >= states_.size()) throw std::out_of_range("fixed state sequence exhausted");
  return states_[pos_++];
}

IidStates::IidStates(std::vector<double> probs, std::uint64_t seed, std::uint64_t stream)
    : probs_(std::move(probs)), rng_(make_stream(seed, stream)) {
  double total = 0.0;
  for (double p : probs_) {
    if (p < 0.0) throw std::invalid_argument("state probabilities must be nonnegative");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("state probabilities must sum to 1");
}

int IidStates::next(const Forecast&) { return sample_index(probs_, rng_); }

PinnedFairStates::PinnedFairStates(int first_state, int num_states, std::uint64_t seed,
                                   std::uint64_t stream)
    : first_(first_state), num_states_(num_states), rng_(make_stream(seed, stream)) {
  if (num_states < 1) throw std::invalid_argument("need at least one state");
  if (first_state < 0 || first_state >= num_states)
    throw std::invalid_argument("pinned first state outside the state set");
}

int PinnedFairStates::next(const Forecast&) {
  if (!started_) {
    started_ = true;
    return first_;
  }
  std::vector<double> fair(static_cast<std::size_t>(num_states_), 1.0);
  return sample_index(fair, rng_);
}

int AntiForecastStates::next(const Forecast& pi) {
  int best = 0;
  for (std::size_t y = 1; y < last_.size(); ++y)
    if (last_[y] < last_[static_cast<std::size_t>(best)]) best = static_cast<int>(y);
  last_ = pi;
  return best;
}

// ---------------------------------------------------------------------------
// Decision table and traces
// ---------------------------------------------------------------------------

MechanismTable tabulate_mechanism(const Game& game, const Mechanism& mech,
                                  const ForecastGrid& grid) {
  if (grid.num_states() != game.num_states())
    throw std::invalid_argument("forecast grid and game disagree on the number of states");
  const std::vector<Policy>& bench = game.benchmarks();
  if (bench.empty()) throw std::invalid_argument("game declares no benchmark policies");

  MechanismTable table;
  table.num_benchmarks = static_cast<int>(bench.size());
  table.optimism = mech.optimism();

  PolicyRegistry registry;
  for (const Policy& b : bench) registry.intern(b);

  int cells = grid.num_cells();
  table.policy_id.reserve(static_cast<std::size_t>(cells));
  table.recommendation.reserve(static_cast<std::size_t>(cells));
  table.optimistic_policy_id.reserve(static_cast<std::size_t>(cells));
  table.optimistic_action.reserve(static_cast<std::size_t>(cells));
  table.benchmark_response.reserve(static_cast<std::size_t>(cells));

  for (int i = 0; i < cells; ++i) {
    const Forecast& pi = grid.cell(i);
    Decision d;
    try {
      d = mech.decide(pi);
    } catch (const std::exception& e) {
      throw std::runtime_error("mechanism '" + mech.kind() + "' failed at grid cell " +
                               std::to_string(i) + ": " + e.what());
    }
    check_action(game, d.recommendation, "recommendation");
    table.policy_id.push_back(registry.intern(d.policy));
    table.recommendation.push_back(d.recommendation);

    std::vector<int> responses(bench.size(), 0);
    int best_k = 0, best_a = 0;
    double best_v = -1e300;
    for (std::size_t k = 0; k < bench.size(); ++k) {
      responses[k] = optimistic_best_response(game, bench[k], pi, 0.0);
      int a = table.optimism == 0.0
                  ? responses[k]
                  : optimistic_best_response(game, bench[k], pi, table.optimism);
      double v = expected_utilities(game, a, bench[k], pi).second;
      if (v > best_v + kTieTolerance) {
        best_v = v;
        best_k = static_cast<int>(k);
        best_a = a;
      }
    }
    table.benchmark_response.push_back(std::move(responses));
    table.optimistic_policy_id.push_back(best_k);
    table.optimistic_action.push_back(best_a);
  }

  table.policies.reserve(static_cast<std::size_t>(registry.size()));
  for (int id = 0; id < registry.size(); ++id) table.policies.push_back(registry.at(id));
  return table;
}

EnvironmentTrace generate_trace(Forecaster& forecaster, StateGenerator& states,
                                std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  EnvironmentTrace trace;
  trace.cells.reserve(static_cast<std::size_t>(horizon));
  trace.states.reserve(static_cast<std::size_t>(horizon));
  int ny = forecaster.grid().num_states();
  for (std::int64_t t = 1; t <= horizon; ++t) {
    try {
      const Forecast& pi = forecaster.step();
      int y = states.next(pi);
      if (y < 0 || y >= ny)
        throw std::out_of_range("state " + std::to_string(y) + " outside the state set");
      trace.cells.push_back(forecaster.last_cell());
      trace.states.push_back(y);
      forecaster.observe(y);
    } catch (const std::exception& e) {
      throw std::runtime_error("round " + std::to_string(t) + ": " + e.what());
    }
  }
  return trace;
}

namespace {

void check_trace(const MechanismTable& table, const EnvironmentTrace& trace) {
  if (trace.cells.size() != trace.states.size())
    throw std::invalid_argument("trace cells and states differ in length");
  if (trace.cells.empty()) throw std::invalid_argument("empty environment trace");
  for (int c : trace.cells)
    if (c < 0 || c >= static_cast<int>(table.policy_id.size()))
      throw std::invalid_argument("trace cell outside the tabulated grid");
}

}  // namespace

ProtocolRun run_on_trace(const Game& game, const MechanismTable& table,
                         const EnvironmentTrace& trace, Agent& agent) {
  check_trace(table, trace);
  ProtocolRun run;
  run.rows.reserve(trace.cells.size());
  for (std::size_t i = 0; i < trace.cells.size(); ++i) {
    int cell = trace.cells[i];
    int pid = table.policy_id[static_cast<std::size_t>(cell)];
    int rec = table.recommendation[static_cast<std::size_t>(cell)];
    const Policy& policy = table.policies[static_cast<std::size_t>(pid)];
    int a = agent.act(policy, pid, rec);
    check_action(game, a, "action");
    int y = trace.states[i];
    agent.observe(y);
    TranscriptRow row;
    row.t = static_cast<std::int64_t>(i) + 1;
    row.cell = cell;
    row.policy_id = pid;
    row.recommendation = rec;
    row.action = a;
    row.state = y;
    row.agent_utility = game.agent_payoff(a, policy, y);
    row.principal_utility = game.principal_payoff(a, policy, y);
    row.optimistic_policy_id = table.optimistic_policy_id[static_cast<std::size_t>(cell)];
    row.optimistic_action = table.optimistic_action[static_cast<std::size_t>(cell)];
    run.principal_total += row.principal_utility;
    run.agent_total += row.agent_utility;
    run.rows.push_back(row);
  }
  return run;
}

namespace {

ReplayRun replay_impl(const Game& game, const MechanismTable& table,
                      const EnvironmentTrace& trace, int benchmark_index, int fixed_rec,
                      Agent& agent) {
  check_benchmark_index(game, benchmark_index);
  check_trace(table, trace);
  ReplayRun run;
  run.benchmark = benchmark_index;
  run.recommendation = fixed_rec;
  run.rows.reserve(trace.cells.size());
  const Policy& policy = table.policies[static_cast<std::size_t>(benchmark_index)];
  for (std::size_t i = 0; i < trace.cells.size(); ++i) {
    int cell = trace.cells[i];
    int rec = fixed_rec >= 0
                  ? fixed_rec
                  : table.benchmark_response[static_cast<std::size_t>(cell)]
                                            [static_cast<std::size_t>(benchmark_index)];
    int a = agent.act(policy, benchmark_index, rec);
    check_action(game, a, "action");
    int y = trace.states[i];
    agent.observe(y);
    TranscriptRow row;
    row.t = static_cast<std::int64_t>(i) + 1;
    row.cell = cell;
    row.policy_id = benchmark_index;
    row.recommendation = rec;
    row.action = a;
    row.state = y;
    row.agent_utility = game.agent_payoff(a, policy, y);
    row.principal_utility = game.principal_payoff(a, policy, y);
    row.optimistic_policy_id = table.optimistic_policy_id[static_cast<std::size_t>(cell)];
    row.optimistic_action = table.optimistic_action[static_cast<std::size_t>(cell)];
    run.principal_total += row.principal_utility;
    run.agent_total += row.agent_utility;
    run.rows.push_back(row);
  }
  return run;
}

}  // namespace

ReplayRun replay_constant(const Game& game, const MechanismTable& table,
                          const EnvironmentTrace& trace, int benchmark_index, Agent& agent) {
  return replay_impl(game, table, trace, benchmark_index, -1, agent);
}

ReplayRun replay_constant_pair(const Game& game, const MechanismTable& table,
                               const EnvironmentTrace& trace, int benchmark_index,
                               int recommendation, Agent& agent) {
  check_action(game, recommendation, "recommendation");
  return replay_impl(game, table, trace, benchmark_index, recommendation, agent);
}

// ---------------------------------------------------------------------------
// Bias events
// ---------------------------------------------------------------------------

namespace {

Event cell_set_event(std::string id, std::shared_ptr<const ForecastGrid> grid,
                     std::shared_ptr<const std::vector<char>> active) {
  Event e;
  e.id = std::move(id);
  e.predicate = [grid = std::move(grid), active = std::move(active)](const Forecast& pi) {
    return (*active)[static_cast<std::size_t>(grid->cell_index(pi))] != 0;
  };
  return e;
}

}  // namespace

std::vector<Event> build_events(const MechanismTable& table, const ForecastGrid& grid,
                                EventFamilies families) {
  auto shared_grid = std::make_shared<const ForecastGrid>(grid);
  int cells = grid.num_cells();
  std::vector<Event> events;

  // Distinct (key_a, key_b) pairs -> the cells where they occur, in key order.
  auto add_pair_family = [&](const char* tag, const char* left, const char* right,
                             const std::function<std::pair<int, int>(int)>& key_of) {
    std::map<std::pair<int, int>, std::vector<char>> active;
    for (int c = 0; c < cells; ++c) {
      auto key = key_of(c);
      auto [it, inserted] =
          active.try_emplace(key, std::vector<char>(static_cast<std::size_t>(cells), 0));
      it->second[static_cast<std::size_t>(c)] = 1;
      (void)inserted;
    }
    for (auto& [key, mask] : active) {
      std::string id = std::string(tag) + ":" + left + std::to_string(key.first) + ":" + right +
                       std::to_string(key.second);
      events.push_back(cell_set_event(
          std::move(id), shared_grid,
          std::make_shared<const std::vector<char>>(std::move(mask))));
    }
  };

  if (families == EventFamilies::kOracle) {
    add_pair_family("E1", "p", "r", [&](int c) {
      return std::make_pair(table.policy_id[static_cast<std::size_t>(c)],
                            table.recommendation[static_cast<std::size_t>(c)]);
    });
    add_pair_family("E2", "b", "a", [&](int c) {
      return std::make_pair(table.optimistic_policy_id[static_cast<std::size_t>(c)],
                            table.optimistic_action[static_cast<std::size_t>(c)]);
    });
  }

  // Benchmark best-response events, one family member per benchmark.
  for (int k = 0; k < table.num_benchmarks; ++k) {
    std::map<std::pair<int, int>, std::vector<char>> active;
    for (int c = 0; c < cells; ++c) {
      int a = table.benchmark_response[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
      auto [it, inserted] = active.try_emplace(
          std::make_pair(k, a), std::vector<char>(static_cast<std::size_t>(cells), 0));
      it->second[static_cast<std::size_t>(c)] = 1;
      (void)inserted;
    }
    for (auto& [key, mask] : active) {
      std::string id =
          "E3:b" + std::to_string(key.first) + ":a" + std::to_string(key.second);
      events.push_back(cell_set_event(
          std::move(id), shared_grid,
          std::make_shared<const std::vector<char>>(std::move(mask))));
    }
  }

  if (families == EventFamilies::kBenchmark) {
    add_pair_family("E4", "b", "a", [&](int c) {
      return std::make_pair(table.optimistic_policy_id[static_cast<std::size_t>(c)],
                            table.optimistic_action[static_cast<std::size_t>(c)]);
    });
  }

  return events;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

namespace {

// Per-(policy, recommendation) tallies: M_u[a][j] accumulates U(j) over the
// rounds where a was played (and likewise for V), which is enough to recover
// every swap/cross-swap/independence quantity exactly.
struct ContextTally {
  std::vector<std::vector<double>> m_u, m_v;
  std::vector<std::int64_t> played;
  std::int64_t rounds = 0;

  explicit ContextTally(int na)
      : m_u(static_cast<std::size_t>(na), std::vector<double>(static_cast<std::size_t>(na), 0.0)),
        m_v(static_cast<std::size_t>(na), std::vector<double>(static_cast<std::size_t>(na), 0.0)),
        played(static_cast<std::size_t>(na), 0) {}
};

std::map<std::pair<int, int>, ContextTally> tally_contexts(
    const Game& game, const std::vector<TranscriptRow>& rows,
    const std::vector<Policy>& policies) {
  int na = game.num_actions();
  std::map<std::pair<int, int>, ContextTally> contexts;
  for (const TranscriptRow& row : rows) {
    auto key = std::make_pair(row.policy_id, row.recommendation);
    auto it = contexts.find(key);
    if (it == contexts.end()) it = contexts.emplace(key, ContextTally(na)).first;
    ContextTally& ctx = it->second;
    const Policy& p = policies.at(static_cast<std::size_t>(row.policy_id));
    auto& mu = ctx.m_u[static_cast<std::size_t>(row.action)];
    auto& mv = ctx.m_v[static_cast<std::size_t>(row.action)];
    for (int j = 0; j < na; ++j) {
      mu[static_cast<std::size_t>(j)] += game.agent_payoff(j, p, row.state);
      mv[static_cast<std::size_t>(j)] += game.principal_payoff(j, p, row.state);
    }
    ++ctx.played[static_cast<std::size_t>(row.action)];
    ++ctx.rounds;
  }
  return contexts;
}

}  // namespace

AssumptionReport assumption_diagnostics(const Game& game, const std::vector<TranscriptRow>& rows,
                                        const std::vector<Policy>& policies) {
  int na = game.num_actions();
  AssumptionReport report;
  auto contexts = tally_contexts(game, rows, policies);
  for (auto& [key, ctx] : contexts) {
    // Column sums: utility of each fixed action over the whole context.
    std::vector<double> col_u(static_cast<std::size_t>(na), 0.0);
    std::vector<double> col_v(static_cast<std::size_t>(na), 0.0);
    double realized_u = 0.0, realized_v = 0.0, swap_here = 0.0;
    for (int a = 0; a < na; ++a) {
      const auto& mu = ctx.m_u[static_cast<std::size_t>(a)];
      for (int j = 0; j < na; ++j) {
        col_u[static_cast<std::size_t>(j)] += mu[static_cast<std::size_t>(j)];
        col_v[static_cast<std::size_t>(j)] += ctx.m_v[static_cast<std::size_t>(a)]
                                                     [static_cast<std::size_t>(j)];
      }
      if (ctx.played[static_cast<std::size_t>(a)] == 0) continue;
      realized_u += mu[static_cast<std::size_t>(a)];
      realized_v += ctx.m_v[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)];
      swap_here += *std::max_element(mu.begin(), mu.end()) - mu[static_cast<std::size_t>(a)];
    }
    double best_fixed = *std::max_element(col_u.begin(), col_u.end());
    report.swap_total += swap_here;
    report.neg_total += realized_u - best_fixed;
    report.ugap_total += (realized_u + swap_here) - best_fixed;
    report.v_shortfall_total += col_v[static_cast<std::size_t>(key.second)] - realized_v;

    // Independence deviations against the context's empirical action mix.
    double n = static_cast<double>(ctx.rounds);
    double mix_u = 0.0, mix_v = 0.0;
    for (int j = 0; j < na; ++j) {
      double w = static_cast<double>(ctx.played[static_cast<std::size_t>(j)]) / n;
      mix_u += w * col_u[static_cast<std::size_t>(j)];
      mix_v += w * col_v[static_cast<std::size_t>(j)];
    }
    ContextDeviation dev;
    dev.policy_id = key.first;
    dev.recommendation = key.second;
    dev.rounds = ctx.rounds;
    dev.u_deviation = std::fabs(realized_u - mix_u) / n;
    dev.v_deviation = std::fabs(realized_v - mix_v) / n;
    report.deviations.push_back(dev);
  }
  return report;
}

Decomposition regret_decomposition(const Game& game, const ProtocolRun& realized,
                                   const ReplayRun& replay,
                                   const std::vector<Policy>& policies) {
  if (realized.rows.size() != replay.rows.size())
    throw std::invalid_argument("realized run and replay differ in length");
  Decomposition d;
  for (std::size_t i = 0; i < realized.rows.size(); ++i) {
    const TranscriptRow& row = realized.rows[i];
    const TranscriptRow& cf = replay.rows[i];
    const Policy& p = policies.at(static_cast<std::size_t>(row.policy_id));
    const Policy& p_opt = policies.at(static_cast<std::size_t>(row.optimistic_policy_id));
    double v_opt = game.principal_payoff(row.optimistic_action, p_opt, row.state);
    double v_rec = game.principal_payoff(row.recommendation, p, row.state);
    d.term_a += v_opt - v_rec;
    d.term_b += v_rec - row.principal_utility;
    d.term_c += cf.principal_utility - v_opt;
  }
  return d;
}

DisagreementReport disagreement_diagnostic(const Game& game,
                                           const std::vector<TranscriptRow>& rows,
                                           const std::vector<Policy>& policies) {
  if (game.num_actions() != 2)
    throw std::invalid_argument("disagreement diagnostic needs exactly two actions");
  if (rows.empty()) throw std::invalid_argument("empty transcript");

  // Per-state utility gap over every policy that actually appears.
  std::vector<char> used;
  for (const TranscriptRow& row : rows) {
    if (used.size() <= static_cast<std::size_t>(row.policy_id))
      used.resize(static_cast<std::size_t>(row.policy_id) + 1, 0);
    used[static_cast<std::size_t>(row.policy_id)] = 1;
  }
  double gap = 1e300;
  for (std::size_t pid = 0; pid < used.size(); ++pid) {
    if (!used[pid]) continue;
    const Policy& p = policies.at(pid);
    for (int y = 0; y < game.num_states(); ++y) {
      double g = std::fabs(game.agent_payoff(0, p, y) - game.agent_payoff(1, p, y));
      gap = std::min(gap, g);
    }
  }
  if (gap <= kTieTolerance)
    throw std::domain_error("some offered policy ties the two actions in some state");

  DisagreementReport report;
  report.gap = gap;

  // Count disagreements and the sqrt-of-cell-count mass per (policy, rec, y).
  std::map<std::tuple<int, int, int>, std::int64_t> cell_counts;
  for (const TranscriptRow& row : rows) {
    if (row.action != row.recommendation) ++report.count;
    ++cell_counts[{row.policy_id, row.recommendation, row.state}];
  }
  double sqrt_mass = 0.0;
  for (const auto& [key, n] : cell_counts) sqrt_mass += std::sqrt(static_cast<double>(n));

  AssumptionReport assumptions = assumption_diagnostics(game, rows, policies);
  report.bound = (assumptions.swap_total + (1.0 + gap) * sqrt_mass / gap) / gap;
  report.violated = static_cast<double>(report.count) > report.bound;
  return report;
}

AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y) {
  AffineFit fit;
  if (x.size() != y.size()) throw std::invalid_argument("mismatched fit inputs");
  fit.points = static_cast<int>(x.size());
  if (x.size() < 2) {
    fit.intercept = x.empty() ? 0.0 : y[0];
    return fit;
  }
  double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  if (std::fabs(denom) < 1e-12) {
    fit.intercept = sy / n;
    return fit;
  }
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

// ---------------------------------------------------------------------------
// Factories and stream layout
// ---------------------------------------------------------------------------

ForecasterFactory event_forecaster_factory() {
  return [](const ForecastGrid& grid, const std::vector<Event>& events, std::uint64_t seed,
            std::uint64_t stream) -> std::unique_ptr<Forecaster> {
    return std::make_unique<EventForecaster>(grid, events, seed, stream);
  };
}

ForecasterFactory calibrated_forecaster_factory() {
  return [](const ForecastGrid& grid, const std::vector<Event>&, std::uint64_t seed,
            std::uint64_t stream) -> std::unique_ptr<Forecaster> {
    return std::make_unique<CalibratedForecaster>(grid, seed, stream);
  };
}

AgentFactory follower_factory() {
  return [](const EnvironmentTrace&, std::uint64_t, std::uint64_t) -> std::unique_ptr<Agent> {
    return std::make_unique<FollowerAgent>();
  };
}

AgentFactory swap_learner_factory(const Game& game) {
  const Game* g = &game;
  return [g](const EnvironmentTrace&, std::uint64_t seed,
             std::uint64_t stream) -> std::unique_ptr<Agent> {
    return std::make_unique<SwapLearnerAgent>(*g, seed, stream);
  };
}

AgentFactory adversary_factory(const Game& game, AdversaryConfig config) {
  const Game* g = &game;
  return [g, config](const EnvironmentTrace& trace, std::uint64_t seed,
                     std::uint64_t stream) -> std::unique_ptr<Agent> {
    return std::make_unique<AdversaryLAgent>(*g, trace.states, seed, stream, config);
  };
}

StateFactory iid_state_factory(std::vector<double> probs) {
  return [probs = std::move(probs)](std::uint64_t seed,
                                    std::uint64_t stream) -> std::unique_ptr<StateGenerator> {
    return std::make_unique<IidStates>(probs, seed, stream);
  };
}

StateFactory pinned_fair_state_factory(int first_state, int num_states) {
  return [first_state, num_states](std::uint64_t seed,
                                   std::uint64_t stream) -> std::unique_ptr<StateGenerator> {
    return std::make_unique<PinnedFairStates>(first_state, num_states, seed, stream);
  };
}

StateFactory anti_forecast_state_factory() {
  return [](std::uint64_t, std::uint64_t) -> std::unique_ptr<StateGenerator> {
    return std::make_unique<AntiForecastStates>();
  };
}

StateFactory fixed_state_factory(std::vector<int> states) {
  return [states = std::move(states)](std::uint64_t,
                                      std::uint64_t) -> std::unique_ptr<StateGenerator> {
    return std::make_unique<FixedSequenceStates>(states);
  };
}

std::uint64_t realized_agent_stream(int rep) {
  return kAgentStreamBase + static_cast<std::uint64_t>(rep) * kAgentStreamStride;
}

std::uint64_t replay_agent_stream(int rep, int slot) {
  if (slot + 1 >= static_cast<int>(kAgentStreamStride))
    throw std::invalid_argument("too many replays per repetition for the stream layout");
  return realized_agent_stream(rep) + 1 + static_cast<std::uint64_t>(slot);
}

// ---------------------------------------------------------------------------
// Experiment driver
// ---------------------------------------------------------------------------

namespace {

RegretSummary summarize(const std::vector<std::vector<double>>& per_benchmark,
                        const std::vector<std::pair<int, int>>& labels) {
  RegretSummary summary;
  if (per_benchmark.empty()) return summary;
  summary.per_benchmark.reserve(per_benchmark.size());
  for (std::size_t k = 0; k < per_benchmark.size(); ++k) {
    BenchmarkRegret b;
    b.benchmark = labels[k].first;
    b.recommendation = labels[k].second;
    b.per_rep = per_benchmark[k];
    double n = static_cast<double>(b.per_rep.size());
    double mean = 0.0;
    for (double v : b.per_rep) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : b.per_rep) var += (v - mean) * (v - mean);
    b.mean = mean;
    b.std_error = b.per_rep.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    summary.per_benchmark.push_back(std::move(b));
  }
  summary.argmax_benchmark = 0;
  summary.policy_regret = summary.per_benchmark[0].mean;
  for (std::size_t k = 1; k < summary.per_benchmark.size(); ++k) {
    if (summary.per_benchmark[k].mean > summary.policy_regret) {
      summary.policy_regret = summary.per_benchmark[k].mean;
      summary.argmax_benchmark = static_cast<int>(k);
    }
  }
  return summary;
}

}  // namespace

RegretSummary summarize_regret(const std::vector<RepetitionResult>& reps, std::int64_t horizon,
                               bool use_pair_replays) {
  if (reps.empty() || horizon < 1) return RegretSummary{};
  const std::vector<ReplayRun>& first =
      use_pair_replays ? reps[0].pair_replays : reps[0].replays;
  std::vector<std::vector<double>> diffs(first.size());
  std::vector<std::pair<int, int>> labels;
  labels.reserve(first.size());
  for (const ReplayRun& r : first) labels.emplace_back(r.benchmark, r.recommendation);
  for (const RepetitionResult& rep : reps) {
    const std::vector<ReplayRun>& replays = use_pair_replays ? rep.pair_replays : rep.replays;
    if (replays.size() != first.size())
      throw std::invalid_argument("repetitions disagree on the replay set");
    for (std::size_t k = 0; k < replays.size(); ++k)
      diffs[k].push_back((replays[k].principal_total - rep.realized.principal_total) /
                         static_cast<double>(horizon));
  }
  return summarize(diffs, labels);
}

ExperimentResult run_experiment(const Game& game, const Mechanism& mech,
                                const ExperimentPlan& plan, const ForecasterFactory& forecaster,
                                const AgentFactory& agent, const StateFactory& states) {
  if (plan.repetitions < 1) throw std::invalid_argument("need at least one repetition");
  for (const auto& [k, r] : plan.pair_replays) {
    check_benchmark_index(game, k);
    check_action(game, r, "recommendation");
  }

  ExperimentResult result{ForecastGrid(game.num_states(), plan.grid_resolution),
                          MechanismTable{},
                          {},
                          EnvironmentTrace{},
                          {},
                          {},
                          RegretSummary{},
                          RegretSummary{}};
  result.table = tabulate_mechanism(game, mech, result.grid);
  result.events = build_events(result.table, result.grid, plan.families);

  std::unique_ptr<Forecaster> fc =
      forecaster(result.grid, result.events, plan.seed, kForecastStream);
  std::unique_ptr<StateGenerator> sg = states(plan.seed, kStateStream);
  result.trace = generate_trace(*fc, *sg, plan.horizon);

  std::vector<ForecastRecord> records;
  records.reserve(result.trace.cells.size());
  for (std::size_t i = 0; i < result.trace.cells.size(); ++i)
    records.push_back({result.grid.cell(result.trace.cells[i]), result.trace.states[i]});
  result.bias = audit_bias(records, result.events);

  int benchmarks = plan.with_replays ? result.table.num_benchmarks : 0;
  result.reps.resize(static_cast<std::size_t>(plan.repetitions));

  std::atomic<int> next_rep{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    while (true) {
      int rep = next_rep.fetch_add(1);
      if (rep >= plan.repetitions) return;
      try {
        RepetitionResult out;
        std::unique_ptr<Agent> realized_agent =
            agent(result.trace, plan.seed, realized_agent_stream(rep));
        out.realized = run_on_trace(game, result.table, result.trace, *realized_agent);
        int slot = 0;
        for (int k = 0; k < benchmarks; ++k) {
          std::unique_ptr<Agent> replay_agent =
              agent(result.trace, plan.seed, replay_agent_stream(rep, slot++));
          out.replays.push_back(
              replay_constant(game, result.table, result.trace, k, *replay_agent));
        }
        for (const auto& [k, r] : plan.pair_replays) {
          std::unique_ptr<Agent> replay_agent =
              agent(result.trace, plan.seed, replay_agent_stream(rep, slot++));
          out.pair_replays.push_back(
              replay_constant_pair(game, result.table, result.trace, k, r, *replay_agent));
        }
        result.reps[static_cast<std::size_t>(rep)] = std::move(out);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int hw = static_cast<int>(std::thread::hardware_concurrency());
  int n_threads = plan.threads > 0 ? plan.threads : std::max(1, hw);
  n_threads = std::min(n_threads, plan.repetitions);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  if (benchmarks > 0) result.regret = summarize_regret(result.reps, plan.horizon, false);
  if (!plan.pair_replays.empty())
    result.pair_regret = summarize_regret(result.reps, plan.horizon, true);
  return result;
}

}  // namespace palab
