#ifndef PALAB_AGENTS_HPP
#define PALAB_AGENTS_HPP

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "palab/game.hpp"

namespace palab {

// A learning agent.  Each round the harness calls act() with the announced
// policy (plus its interned id, which keys the (policy, recommendation)
// context) and then observe() with the realized state.  One instance per run;
// randomness comes from the agent's own seeded substream.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual int act(const Policy& policy, int policy_id, int recommendation) = 0;
  virtual void observe(int realized_state) = 0;
  virtual std::string kind() const = 0;
};

// Plays exactly the recommendation.  Its per-context action distribution is a
// point mass on r, so both no-secret-information sums vanish identically.
class FollowerAgent : public Agent {
 public:
  int act(const Policy& policy, int policy_id, int recommendation) override;
  void observe(int realized_state) override {}
  std::string kind() const override { return "follower"; }
};

// Per-(policy id, recommendation) context key.
using ContextKey = std::pair<int, int>;

// Realized-play audit for one context, using only transcript quantities:
// swap_gain = sum over played actions a of
//   max_j [ sum_{t: a_t = a} U(j, p, y_t) ] - sum_{t: a_t = a} U(a, p, y_t).
struct ContextAudit {
  int policy_id = 0;
  int recommendation = 0;
  std::int64_t rounds = 0;
  double swap_gain = 0.0;
};

// No-swap-regret learner: one bank of |A| multiplicative-weights sub-learners
// per context.  Sub-learner i is charged the realized utility vector scaled
// by the probability q_i it was "listened to"; the played mixture q is the
// stationary distribution of the row matrix of sub-learner weights.
class SwapLearnerAgent : public Agent {
 public:
  SwapLearnerAgent(const Game& game, std::uint64_t seed, std::uint64_t stream);

  int act(const Policy& policy, int policy_id, int recommendation) override;
  void observe(int realized_state) override;
  std::string kind() const override { return "swap"; }

  // The mixture used by the most recent act().
  const std::vector<double>& last_mixture() const { return last_q_; }
  // ||q - qP||_1 of the most recent stationary solve.
  double last_residual() const { return last_residual_; }

  // Realized-play accounting, reproducible from the transcript alone.
  double internal_swap_total() const;
  std::vector<ContextAudit> context_audits() const;

 private:
  struct ContextState {
    std::int64_t rounds = 0;
    // cum_reward[i][j]: utility sub-learner i credits to action j.
    std::vector<std::vector<double>> cum_reward;
    // deviation_utility[a][j]: total U(j) over rounds where a was played.
    std::vector<std::vector<double>> deviation_utility;
    std::vector<std::int64_t> played_count;
  };

  ContextState& state_for(const ContextKey& key);
  std::vector<double> stationary_mixture(const ContextState& ctx);

  const Game* game_;
  std::mt19937_64 rng_;
  std::map<ContextKey, ContextState> contexts_;

  // Pending round, filled by act() and consumed by observe().
  bool armed_ = false;
  ContextKey pending_key_{0, 0};
  Policy pending_policy_;
  std::vector<double> pending_q_;
  int pending_action_ = 0;

  std::vector<double> last_q_;
  double last_residual_ = 0.0;
};

// Cooperation threshold: the scripted agent tolerates a state-count imbalance
// of theta(T) = sqrt(12 T ln(2 (1 + log2 T)^2)).  Requires T >= 2.
double balanced_threshold(std::int64_t T);

struct AdversaryConfig {
  int work_action = 0;
  int shirk_action = 1;
  int medium_state = 0;
  double trigger_after_medium = 0.5;  // cooperate only with this contract...
  double trigger_after_high = 0.6;    // ...chosen by the first scripted state
  double work_prob_on_high = 0.2;     // cooperative play on high states
};

// Clairvoyant scripted agent for the two-state work/shirk lower bound.  Round
// one plays shirk.  Afterwards it cooperates - work exactly on medium states
// (after a medium first state) or work on medium plus a work_prob_on_high
// coin on high states (after a high first state) - for as long as the policy
// equals its trigger contract, the recommendation is work, and the scripted
// state counts stay balanced.  The first violation switches it permanently to
// an internal no-swap-regret learner that has been fed the entire history.
class AdversaryLAgent : public Agent {
 public:
  enum class Phase { kCooperate, kNoRegret };

  AdversaryLAgent(const Game& game, std::vector<int> script, std::uint64_t seed,
                  std::uint64_t stream, AdversaryConfig config = {});

  int act(const Policy& policy, int policy_id, int recommendation) override;
  void observe(int realized_state) override;
  std::string kind() const override { return "adversary-L"; }

  Phase phase() const { return phase_; }
  double trigger_contract() const { return trigger_; }
  std::int64_t horizon() const { return static_cast<std::int64_t>(script_.size()); }
  // |m_M(t) - m_H(t)| <= theta(T), counting scripted states through round t.
  bool balanced_at(std::int64_t t) const;

  // The learner's own sampling substream is derived from the agent's stream
  // id plus this offset; harness stream ids stay far below it.
  static constexpr std::uint64_t kLearnerStreamOffset = 1u << 20;

 private:
  const Game* game_;
  std::vector<int> script_;
  std::vector<std::int64_t> imbalance_;  // prefix |#medium - #other| by round
  AdversaryConfig config_;
  double trigger_ = 0.0;
  bool cooperate_with_coin_ = false;  // b*-style play (high first state)
  double theta_ = 0.0;
  Phase phase_ = Phase::kCooperate;
  std::mt19937_64 rng_;
  SwapLearnerAgent learner_;
  std::int64_t rounds_done_ = 0;
  bool armed_ = false;
};

}  // namespace palab

#endif
