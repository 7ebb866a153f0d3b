#ifndef PALAB_HARNESS_HPP
#define PALAB_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "palab/agents.hpp"
#include "palab/forecast.hpp"
#include "palab/game.hpp"
#include "palab/oracle.hpp"

namespace palab {

// ---------------------------------------------------------------------------
// Mechanisms: deterministic maps from a forecast to (policy, recommendation).
// The recommendation is always the exact optimistic best response to the
// chosen policy under the forecast; the principal never reacts to actions.
// ---------------------------------------------------------------------------

struct Decision {
  Policy policy;
  int recommendation = 0;
};

class Mechanism {
 public:
  virtual ~Mechanism() = default;
  virtual Decision decide(const Forecast& pi) const = 0;
  // Optimism level used for the per-round optimistic benchmark trace.
  virtual double optimism() const { return 0.0; }
  virtual std::string kind() const = 0;
};

// Always offers one benchmark policy.
class ConstantMechanism : public Mechanism {
 public:
  ConstantMechanism(const Game& game, int benchmark_index);
  Decision decide(const Forecast& pi) const override;
  std::string kind() const override { return "constant"; }

 private:
  const Game* game_;
  int benchmark_ = 0;
};

// Offers one benchmark policy with a frozen recommendation.
class ConstantPairMechanism : public Mechanism {
 public:
  ConstantPairMechanism(const Game& game, int benchmark_index, int recommendation);
  Decision decide(const Forecast& pi) const override;
  std::string kind() const override { return "constant-pair"; }

 private:
  const Game* game_;
  int benchmark_ = 0;
  int recommendation_ = 0;
};

// Picks the benchmark whose exact best response maximizes the principal's
// forecast value (first declared wins ties).
class BenchmarkBestMechanism : public Mechanism {
 public:
  explicit BenchmarkBestMechanism(const Game& game) : game_(&game) {}
  Decision decide(const Forecast& pi) const override;
  std::string kind() const override { return "benchmark-best"; }

 private:
  const Game* game_;
};

// Grid-scan stable-contract oracle as the choice rule.
class LinearOracleMechanism : public Mechanism {
 public:
  LinearOracleMechanism(const LinearContractGame& game, LinearOracleParams params);
  Decision decide(const Forecast& pi) const override;
  double optimism() const override;
  std::string kind() const override { return "linear-oracle"; }

 private:
  const LinearContractGame* game_;
  LinearOracleParams params_;
};

// Stable signal-scheme oracle at prior mu = pi[1] as the choice rule.
class PersuasionOracleMechanism : public Mechanism {
 public:
  PersuasionOracleMechanism(const PersuasionGame& game, PersuasionOracleParams params,
                            double optimism_eps);
  Decision decide(const Forecast& pi) const override;
  double optimism() const override { return optimism_; }
  std::string kind() const override { return "persuasion-oracle"; }

 private:
  const PersuasionGame* game_;
  PersuasionOracleParams params_;
  double optimism_ = 0.0;
};

// ---------------------------------------------------------------------------
// State generators
// ---------------------------------------------------------------------------

class StateGenerator {
 public:
  virtual ~StateGenerator() = default;
  // May inspect the current forecast (the adversarial generator does) but
  // never the agent's actions.
  virtual int next(const Forecast& pi) = 0;
  virtual std::string kind() const = 0;
};

class FixedSequenceStates : public StateGenerator {
 public:
  explicit FixedSequenceStates(std::vector<int> states);
  int next(const Forecast& pi) override;
  std::string kind() const override { return "fixed"; }

 private:
  std::vector<int> states_;
  std::size_t pos_ = 0;
};

class IidStates : public StateGenerator {
 public:
  IidStates(std::vector<double> probs, std::uint64_t seed, std::uint64_t stream);
  int next(const Forecast& pi) override;
  std::string kind() const override { return "iid"; }

 private:
  std::vector<double> probs_;
  std::mt19937_64 rng_;
};

// First state pinned, remaining rounds i.i.d. uniform over all states.
class PinnedFairStates : public StateGenerator {
 public:
  PinnedFairStates(int first_state, int num_states, std::uint64_t seed, std::uint64_t stream);
  int next(const Forecast& pi) override;
  std::string kind() const override { return "pinned-fair"; }

 private:
  int first_ = 0;
  int num_states_ = 0;
  std::mt19937_64 rng_;
  bool started_ = false;
};

// Greedy adversary: realizes the state the PREVIOUS round's forecast
// considered least likely (lowest index on ties; state 0 on round one).
// Keying on the lagged forecast keeps the adversary adaptive — it may use
// everything published before the current round — without letting it react
// to the forecaster's current randomization, which is the information model
// the bias guarantees are stated for (an adversary that reads the realized
// forecast defeats per-cell calibration outright).
class AntiForecastStates : public StateGenerator {
 public:
  int next(const Forecast& pi) override;
  std::string kind() const override { return "anti-forecast"; }

 private:
  Forecast last_;
};

// ---------------------------------------------------------------------------
// Decision table, environment trace, transcripts
// ---------------------------------------------------------------------------

// The mechanism, the optimistic benchmark trace, and every constant
// mechanism's recommendation depend on the forecast only through its grid
// cell, so one table per run covers the realized pass and all replays.
struct MechanismTable {
  std::vector<int> policy_id;             // [cell] registry id of the offered policy
  std::vector<int> recommendation;        // [cell] exact best response to it
  std::vector<int> optimistic_policy_id;  // [cell] best benchmark at the optimism level
  std::vector<int> optimistic_action;     // [cell] its eps-optimistic response
  std::vector<std::vector<int>> benchmark_response;  // [cell][benchmark] exact best response
  std::vector<Policy> policies;           // registry snapshot; benchmarks come first
  int num_benchmarks = 0;
  double optimism = 0.0;
};

MechanismTable tabulate_mechanism(const Game& game, const Mechanism& mech,
                                  const ForecastGrid& grid);

// The environment half of a run: forecast cells and realized states.  Both
// are action-independent, so one trace is shared verbatim by the realized run,
// every repetition, and every counterfactual replay.
struct EnvironmentTrace {
  std::vector<int> cells;
  std::vector<int> states;
};

EnvironmentTrace generate_trace(Forecaster& forecaster, StateGenerator& states,
                                std::int64_t horizon);

struct TranscriptRow {
  std::int64_t t = 0;  // 1-based round
  int cell = 0;
  int policy_id = 0;
  int recommendation = 0;
  int action = 0;
  int state = 0;
  double agent_utility = 0.0;
  double principal_utility = 0.0;
  int optimistic_policy_id = 0;
  int optimistic_action = 0;
};

struct ProtocolRun {
  std::vector<TranscriptRow> rows;
  double principal_total = 0.0;
  double agent_total = 0.0;
};

ProtocolRun run_on_trace(const Game& game, const MechanismTable& table,
                         const EnvironmentTrace& trace, Agent& agent);

// Counterfactual constant mechanism: same forecasts, same states, fresh agent.
// Policies outside the benchmark set are rejected by construction (the
// interface takes an index into game.benchmarks()).  recommendation < 0 means
// the per-round exact best response; otherwise it is held constant.
struct ReplayRun {
  int benchmark = 0;
  int recommendation = -1;
  std::vector<TranscriptRow> rows;
  double principal_total = 0.0;
  double agent_total = 0.0;
};

ReplayRun replay_constant(const Game& game, const MechanismTable& table,
                          const EnvironmentTrace& trace, int benchmark_index, Agent& agent);
ReplayRun replay_constant_pair(const Game& game, const MechanismTable& table,
                               const EnvironmentTrace& trace, int benchmark_index,
                               int recommendation, Agent& agent);

// ---------------------------------------------------------------------------
// Bias events
// ---------------------------------------------------------------------------

// Which event families the forecaster is asked to be unbiased on:
//   kOracle    — realized (policy, recommendation) pairs, optimistic benchmark
//                pairs, and benchmark best-response events (stable-oracle rule)
//   kBenchmark — benchmark best-response events plus (best benchmark, its
//                response) pairs (benchmark-best rule)
enum class EventFamilies { kOracle, kBenchmark };

// Events are cell-membership predicates; pairs that never occur on the grid
// are dropped (they can never fire on grid-valued forecasts).  Ids:
// E1:p<policy_id>:r<action>, E2:b<benchmark>:a<action>,
// E3:b<benchmark>:a<action>, E4:b<benchmark>:a<action>.
std::vector<Event> build_events(const MechanismTable& table, const ForecastGrid& grid,
                                EventFamilies families);

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

// Per-(policy, recommendation) deviation between realized utilities and the
// utilities of the context's empirical action mix (the no-secret-information
// measurements), normalized by the subsequence length.
struct ContextDeviation {
  int policy_id = 0;
  int recommendation = 0;
  std::int64_t rounds = 0;
  double u_deviation = 0.0;
  double v_deviation = 0.0;
};

struct AssumptionReport {
  double swap_total = 0.0;  // best per-(policy,rec,action) deviation gain
  double neg_total = 0.0;   // realized minus best fixed (policy,rec)->action map
  double ugap_total = 0.0;  // action-aware minus recommendation-only benchmark
  double v_shortfall_total = 0.0;  // sum of V(rec) - V(action)
  std::vector<ContextDeviation> deviations;
};

AssumptionReport assumption_diagnostics(const Game& game, const std::vector<TranscriptRow>& rows,
                                        const std::vector<Policy>& policies);

// Appendix-style three-term split of the regret against one benchmark replay:
//   term_a: optimistic benchmark value vs recommended value, on realized states
//   term_b: recommended value vs realized value
//   term_c: replay value vs optimistic benchmark value
// term_a + term_b + term_c telescopes to replay total - realized total.
struct Decomposition {
  double term_a = 0.0;
  double term_b = 0.0;
  double term_c = 0.0;
};

Decomposition regret_decomposition(const Game& game, const ProtocolRun& realized,
                                   const ReplayRun& replay,
                                   const std::vector<Policy>& policies);

// Two-action diagnostic: rounds where the action disagrees with the
// recommendation, against the bound implied by measured swap regret and the
// per-state utility gap.  Requires every offered policy to separate the two
// actions in every state.
struct DisagreementReport {
  std::int64_t count = 0;
  double bound = 0.0;
  double gap = 0.0;
  bool violated = false;
};

DisagreementReport disagreement_diagnostic(const Game& game,
                                           const std::vector<TranscriptRow>& rows,
                                           const std::vector<Policy>& policies);

// Ordinary least squares y ~ slope*x + intercept; slope 0 on degenerate input.
struct AffineFit {
  double slope = 0.0;
  double intercept = 0.0;
  int points = 0;
};

AffineFit fit_affine(const std::vector<double>& x, const std::vector<double>& y);

// ---------------------------------------------------------------------------
// Experiments: repetitions over a shared environment trace
// ---------------------------------------------------------------------------

using ForecasterFactory = std::function<std::unique_ptr<Forecaster>(
    const ForecastGrid& grid, const std::vector<Event>& events, std::uint64_t seed,
    std::uint64_t stream)>;
// Agents may read the realized state sequence (the clairvoyant adversary does).
using AgentFactory = std::function<std::unique_ptr<Agent>(
    const EnvironmentTrace& trace, std::uint64_t seed, std::uint64_t stream)>;
using StateFactory =
    std::function<std::unique_ptr<StateGenerator>(std::uint64_t seed, std::uint64_t stream)>;

ForecasterFactory event_forecaster_factory();
ForecasterFactory calibrated_forecaster_factory();
AgentFactory follower_factory();
AgentFactory swap_learner_factory(const Game& game);
AgentFactory adversary_factory(const Game& game, AdversaryConfig config = AdversaryConfig{});
StateFactory iid_state_factory(std::vector<double> probs);
StateFactory pinned_fair_state_factory(int first_state, int num_states);
StateFactory anti_forecast_state_factory();
StateFactory fixed_state_factory(std::vector<int> states);

// Stream layout: states and forecasts are shared across repetitions (their
// randomness is part of the environment); each repetition's agents get their
// own substreams.  All ids stay far below the swap learner's internal offset.
constexpr std::uint64_t kStateStream = 0;
constexpr std::uint64_t kForecastStream = 1;
constexpr std::uint64_t kAgentStreamBase = 64;
constexpr std::uint64_t kAgentStreamStride = 64;

std::uint64_t realized_agent_stream(int rep);
std::uint64_t replay_agent_stream(int rep, int slot);  // slot over benchmark + pair replays

struct ExperimentPlan {
  std::int64_t horizon = 0;
  int repetitions = 32;
  std::uint64_t seed = 0;
  int grid_resolution = 32;
  EventFamilies families = EventFamilies::kBenchmark;
  bool with_replays = true;                          // one replay per benchmark
  std::vector<std::pair<int, int>> pair_replays;     // (benchmark, recommendation)
  int threads = 0;                                   // 0 = hardware concurrency
};

struct RepetitionResult {
  ProtocolRun realized;
  std::vector<ReplayRun> replays;       // per benchmark, in declaration order
  std::vector<ReplayRun> pair_replays;  // in plan order
};

struct BenchmarkRegret {
  int benchmark = 0;
  int recommendation = -1;  // fixed-pair replays record it; -1 otherwise
  double mean = 0.0;        // mean per-round regret over repetitions
  double std_error = 0.0;
  std::vector<double> per_rep;
};

struct RegretSummary {
  std::vector<BenchmarkRegret> per_benchmark;
  double policy_regret = 0.0;  // max over benchmarks of the mean
  int argmax_benchmark = 0;    // index into per_benchmark
};

RegretSummary summarize_regret(const std::vector<RepetitionResult>& reps, std::int64_t horizon,
                               bool use_pair_replays);

struct ExperimentResult {
  ForecastGrid grid;
  MechanismTable table;
  std::vector<Event> events;
  EnvironmentTrace trace;
  std::vector<BiasRow> bias;  // audited conditional bias of the shared trace
  std::vector<RepetitionResult> reps;
  RegretSummary regret;       // over benchmark replays (empty if disabled)
  RegretSummary pair_regret;  // over fixed-pair replays (empty if none)
};

ExperimentResult run_experiment(const Game& game, const Mechanism& mech,
                                const ExperimentPlan& plan, const ForecasterFactory& forecaster,
                                const AgentFactory& agent, const StateFactory& states);

}  // namespace palab

#endif
