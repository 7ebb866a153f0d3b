#ifndef PALAB_ORACLE_HPP
#define PALAB_ORACLE_HPP

#include <string>
#include <vector>

#include "palab/game.hpp"

namespace palab {

// ---------------------------------------------------------------------------
// Stability checks (any game kind)
// ---------------------------------------------------------------------------

// How a single action satisfied (or failed) the stability test.
enum class StabilityDisjunct { kBestResponse, kAgentGap, kPrincipalGap, kViolated };

struct ActionVerdict {
  int action = 0;
  double u_gap = 0.0;  // U(a*) - U(a) under the forecast
  double v_gap = 0.0;  // V(a*) - V(a) under the forecast
  StabilityDisjunct held = StabilityDisjunct::kViolated;
};

// Certificate for the two-disjunct stability test: every action must either
// trail the best response by at least beta in agent utility, or cost the
// principal at most gamma relative to the optimistic best response.
//
// The gamma = 0 case means exact indifference and is tested two-sided,
// |V(a) - V(a*)| <= kTieTolerance.  A one-sided reading would accept points
// where a plausible deviation strictly improves the principal's payoff, and
// the contract-scan oracle could then stop inside a tie window where its
// payoff guarantee (the exact-best-response value) falls further below the
// optimistic benchmark than the advertised optimality slack.
struct StabilityCertificate {
  Policy policy;
  double beta = 0.0;
  double gamma = 0.0;
  int best_action = 0;
  bool stable = false;
  std::vector<ActionVerdict> verdicts;
};

StabilityCertificate is_stable(const Game& game, const Policy& policy, const Forecast& pi,
                               double beta, double gamma);

// Full candidate test: stable per above, and the policy's optimistic value is
// within c of every benchmark's eps-optimistic value.
bool is_optimal_stable(const Game& game, const Policy& policy, const Forecast& pi, double c,
                       double eps, double beta, double gamma);

// ---------------------------------------------------------------------------
// Linear-contract oracle
// ---------------------------------------------------------------------------

struct TieContract {
  double contract = 0.0;
  int action_lo = 0;
  int action_hi = 0;
};

// For every unordered action pair with distinct expected outcome values, the
// unique contract in [0,1] (if any) that equalizes the agent's utilities.
// Pairs with equal expected outcome value never tie (their costs differ).
std::vector<TieContract> tie_contracts(const LinearContractGame& game, const Forecast& pi);

// Distinct contracts at which the exact best-response set has two or more
// members; there are at most num_actions-1 of them.
std::vector<double> multi_response_contracts(const LinearContractGame& game, const Forecast& pi);

struct LinearOracleParams {
  double beta = 0.0;   // stability parameter
  double delta = 0.0;  // contract grid step; 1/delta must be integral

  void validate() const;
  double eps(const LinearContractGame& game) const;  // min_cost_gap * beta / 2
};

struct LinearOracleResult {
  double contract = 1.0;      // the returned policy
  double p_optimistic = 0.0;  // best benchmark value under eps-optimism
  double eps = 0.0;           // stability threshold used in the grid scan
};

// Grid-scan oracle: compute the optimistic benchmark contract, then walk the
// delta-grid upward from it and return the first (eps,0)-stable contract,
// falling back to 1 (where the principal's payoff is identically zero).
LinearOracleResult linear_stable_oracle(const LinearContractGame& game, const Forecast& pi,
                                        const LinearOracleParams& params);

// True iff the best expected outcome value over the eps-best-response set at
// p1 weakly dominates the one at p2.  Requires p1 >= p2.
bool check_monotonicity(const LinearContractGame& game, const Forecast& pi, double p1, double p2,
                        double eps);

// ---------------------------------------------------------------------------
// Persuasion oracle (binary state)
// ---------------------------------------------------------------------------

struct EnvelopeInterval {
  double lo = 0.0;
  double hi = 0.0;
  int strategy = 0;
};

// The receiver's utility as a function of the posterior mean mu is the upper
// envelope of one line per strategy; each strategy owns one interval of [0,1]
// where it is the unique argmax.
struct EnvelopeDecomposition {
  std::vector<EnvelopeInterval> intervals;  // ordered left to right
  double min_length = 0.0;     // C: shortest interval
  double min_slope_gap = 0.0;  // c1: smallest pairwise slope difference
  double c2 = 0.0;             // 2*sqrt((1/(c1*C))*(1+1/C))

  // Interval owning mu; shared boundaries belong to the lower-indexed one.
  int interval_at(double mu) const;
  int interval_of_strategy(int s) const;
};

EnvelopeDecomposition build_envelope(const PersuasionGame& game);

struct ClosurePoint {
  double mu = 0.0;
  double value = 0.0;  // principal's value of the strategy realized at mu
  int strategy = 0;
};

// Upper concave hull of the principal's value over posterior means, together
// with a piecewise-linear evaluator.
struct ConcaveClosure {
  std::vector<ClosurePoint> points;  // hull vertices, mu ascending, 0 and 1 included
  double evaluate(double mu) const;
};

ConcaveClosure concave_closure(const PersuasionGame& game, const EnvelopeDecomposition& env);

// Shift every interior hull vertex by beta into the interior of the interval
// whose strategy realizes it, then re-hull.  Requires beta < C/4.
ConcaveClosure stabilize_closure(const PersuasionGame& game, const EnvelopeDecomposition& env,
                                 const ConcaveClosure& closure, double beta);

struct Posterior {
  double weight = 0.0;
  double mu = 0.0;
  int signal = 0;  // strategy/signal the posterior is routed to
};

struct PosteriorDistribution {
  double prior = 0.0;
  std::vector<Posterior> posteriors;

  double implied_prior() const;  // sum of weight * mu
};

// Write the prior as a convex combination of the two hull vertices bracketing
// it (one vertex if the prior sits exactly on a vertex).
PosteriorDistribution split_prior(const ConcaveClosure& closure, double mu);

// Conditional signal distributions p(s|y), stored row-major by state like the
// persuasion Policy encoding.
struct SignalScheme {
  int num_signals = 0;
  std::vector<double> probs;  // probs[y * num_signals + s]

  double at(int signal, int state) const {
    return probs[static_cast<std::size_t>(state * num_signals + signal)];
  }
  Policy to_policy() const { return Policy{probs}; }
};

// Invert Bayes' rule: p(s_i|y=1) = w_i mu_i / mu, p(s_i|y=0) = w_i(1-mu_i)/(1-mu).
// A degenerate prior collapses to the single-signal scheme.
SignalScheme scheme_from_posteriors(const PosteriorDistribution& post, int num_signals);

// Forward Bayes' rule on a scheme; lists signals with positive probability.
PosteriorDistribution posteriors_from_scheme(const SignalScheme& scheme, double prior);

struct PersuasionOracleParams {
  double beta = 0.0;   // stabilization shift; must stay below C/4
  double x = 0.0;      // stability trade-off knob in [0,1]
  double delta = 0.0;  // conditional-probability grid; at most beta^2/16

  void validate() const;
};

struct PersuasionOracleResult {
  SignalScheme scheme;       // final, conditionals on the delta-grid
  SignalScheme raw_scheme;   // before discretization
  PosteriorDistribution posteriors;  // before discretization
  bool informative = false;  // false when a single signal is sent
};

PersuasionOracleResult persuasion_stable_oracle(const PersuasionGame& game, double prior_mu,
                                                const PersuasionOracleParams& params);

// The guarantee the construction delivers, as a (c, eps, beta, gamma) tuple
// for the optimal-stability test, at optimism level eps.
struct PersuasionGuarantee {
  double c = 0.0;
  double eps = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

PersuasionGuarantee persuasion_guarantee(const EnvelopeDecomposition& env,
                                         const PersuasionOracleParams& params, double eps);

}  // namespace palab

#endif
