#include "palab/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "palab/rng.hpp"

namespace palab {

int FollowerAgent::act(const Policy&, int, int recommendation) {
  return recommendation;
}

SwapLearnerAgent::SwapLearnerAgent(const Game& game, std::uint64_t seed,
                                   std::uint64_t stream)
    : game_(&game), rng_(make_stream(seed, stream)) {}

SwapLearnerAgent::ContextState& SwapLearnerAgent::state_for(
    const ContextKey& key) {
  auto it = contexts_.find(key);
  if (it != contexts_.end()) return it->second;
  int na = game_->num_actions();
  ContextState ctx;
  ctx.cum_reward.assign(na, std::vector<double>(na, 0.0));
  ctx.deviation_utility.assign(na, std::vector<double>(na, 0.0));
  ctx.played_count.assign(na, 0);
  return contexts_.emplace(key, std::move(ctx)).first->second;
}

std::vector<double> SwapLearnerAgent::stationary_mixture(
    const ContextState& ctx) {
  int na = game_->num_actions();
  // Learning rate by the doubling trick: eta = sqrt(ln|A| / n) with the
  // context round count n rounded up to a power of two.
  std::int64_t n = std::max<std::int64_t>(1, ctx.rounds);
  std::int64_t pow2 = 1;
  while (pow2 < n) pow2 <<= 1;
  double eta = std::sqrt(std::log(static_cast<double>(na)) /
                         static_cast<double>(pow2));

  // Row i: sub-learner i's multiplicative-weights distribution.
  std::vector<std::vector<double>> p(na, std::vector<double>(na));
  for (int i = 0; i < na; ++i) {
    double top = ctx.cum_reward[i][0];
    for (int j = 1; j < na; ++j) top = std::max(top, ctx.cum_reward[i][j]);
    double total = 0.0;
    for (int j = 0; j < na; ++j) {
      p[i][j] = std::exp(eta * (ctx.cum_reward[i][j] - top));
      total += p[i][j];
    }
    for (int j = 0; j < na; ++j) p[i][j] /= total;
  }

  // Stationary q = qP by power iteration from uniform.
  std::vector<double> q(na, 1.0 / na), next(na);
  for (int iter = 0; iter < 500; ++iter) {
    for (int j = 0; j < na; ++j) next[j] = 0.0;
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < na; ++j) next[j] += q[i] * p[i][j];
    double gap = 0.0;
    for (int j = 0; j < na; ++j) gap += std::fabs(next[j] - q[j]);
    q = next;
    if (gap <= 1e-10) break;
  }
  double residual = 0.0;
  for (int j = 0; j < na; ++j) next[j] = 0.0;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j) next[j] += q[i] * p[i][j];
  for (int j = 0; j < na; ++j) residual += std::fabs(next[j] - q[j]);
  last_residual_ = residual;
  return q;
}

int SwapLearnerAgent::act(const Policy& policy, int policy_id,
                          int recommendation) {
  if (armed_) throw std::logic_error("act() called twice without observe()");
  pending_key_ = ContextKey{policy_id, recommendation};
  ContextState& ctx = state_for(pending_key_);
  pending_q_ = stationary_mixture(ctx);
  last_q_ = pending_q_;
  pending_policy_ = policy;
  pending_action_ = pending_q_.size() == 1
                        ? 0
                        : sample_index(pending_q_, rng_);
  armed_ = true;
  return pending_action_;
}

void SwapLearnerAgent::observe(int realized_state) {
  if (!armed_) throw std::logic_error("observe() without a pending act()");
  int na = game_->num_actions();
  std::vector<double> u(na);
  for (int j = 0; j < na; ++j)
    u[j] = game_->agent_payoff(j, pending_policy_, realized_state);
  ContextState& ctx = state_for(pending_key_);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < na; ++j)
      ctx.cum_reward[i][j] += pending_q_[i] * u[j];
  for (int j = 0; j < na; ++j)
    ctx.deviation_utility[pending_action_][j] += u[j];
  ++ctx.played_count[pending_action_];
  ++ctx.rounds;
  armed_ = false;
}

double SwapLearnerAgent::internal_swap_total() const {
  double total = 0.0;
  for (const auto& [key, ctx] : contexts_) {
    int na = game_->num_actions();
    for (int a = 0; a < na; ++a) {
      if (ctx.played_count[a] == 0) continue;
      double best = ctx.deviation_utility[a][0];
      for (int j = 1; j < na; ++j)
        best = std::max(best, ctx.deviation_utility[a][j]);
      total += best - ctx.deviation_utility[a][a];
    }
  }
  return total;
}

std::vector<ContextAudit> SwapLearnerAgent::context_audits() const {
  std::vector<ContextAudit> out;
  for (const auto& [key, ctx] : contexts_) {
    ContextAudit audit;
    audit.policy_id = key.first;
    audit.recommendation = key.second;
    audit.rounds = ctx.rounds;
    int na = game_->num_actions();
    for (int a = 0; a < na; ++a) {
      if (ctx.played_count[a] == 0) continue;
      double best = ctx.deviation_utility[a][0];
      for (int j = 1; j < na; ++j)
        best = std::max(best, ctx.deviation_utility[a][j]);
      audit.swap_gain += best - ctx.deviation_utility[a][a];
    }
    out.push_back(audit);
  }
  return out;
}

double balanced_threshold(std::int64_t T) {
  if (T < 2) throw std::invalid_argument("balanced threshold needs T >= 2");
  double t = static_cast<double>(T);
  double lg = std::log2(t);
  return std::sqrt(12.0 * t * std::log(2.0 * (1.0 + lg) * (1.0 + lg)));
}

AdversaryLAgent::AdversaryLAgent(const Game& game, std::vector<int> script,
                                 std::uint64_t seed, std::uint64_t stream,
                                 AdversaryConfig config)
    : game_(&game),
      script_(std::move(script)),
      config_(config),
      rng_(make_stream(seed, stream)),
      learner_(game, seed, stream + kLearnerStreamOffset) {
  if (script_.size() < 2)
    throw std::invalid_argument("adversary script needs at least two rounds");
  for (int y : script_)
    if (y < 0 || y >= game_->num_states())
      throw std::invalid_argument("scripted state out of range");
  theta_ = balanced_threshold(static_cast<std::int64_t>(script_.size()));
  bool first_medium = script_[0] == config_.medium_state;
  trigger_ = first_medium ? config_.trigger_after_medium
                          : config_.trigger_after_high;
  cooperate_with_coin_ = !first_medium;
  imbalance_.reserve(script_.size());
  std::int64_t diff = 0;
  for (int y : script_) {
    diff += (y == config_.medium_state) ? 1 : -1;
    imbalance_.push_back(std::llabs(diff));
  }
}

bool AdversaryLAgent::balanced_at(std::int64_t t) const {
  if (t < 1 || t > horizon()) throw std::out_of_range("round outside script");
  return static_cast<double>(imbalance_[static_cast<std::size_t>(t - 1)]) <=
         theta_;
}

int AdversaryLAgent::act(const Policy& policy, int policy_id,
                         int recommendation) {
  if (armed_) throw std::logic_error("act() called twice without observe()");
  std::int64_t t = rounds_done_ + 1;
  if (t > horizon()) throw std::out_of_range("adversary script exhausted");
  // The internal learner shadows every round so that, at the moment of
  // defection, it holds the statistics of the entire history of play.
  int learner_action = learner_.act(policy, policy_id, recommendation);
  armed_ = true;
  if (phase_ == Phase::kNoRegret) return learner_action;
  if (t == 1) return config_.shirk_action;
  bool trigger = policy.params.size() == 1 &&
                 std::fabs(policy.params[0] - trigger_) <= kTieTolerance &&
                 recommendation == config_.work_action && balanced_at(t);
  if (!trigger) {
    phase_ = Phase::kNoRegret;
    return learner_action;
  }
  int y = script_[static_cast<std::size_t>(t - 1)];
  if (y == config_.medium_state) return config_.work_action;
  if (cooperate_with_coin_ && uniform01(rng_) < config_.work_prob_on_high)
    return config_.work_action;
  return config_.shirk_action;
}

void AdversaryLAgent::observe(int realized_state) {
  if (!armed_) throw std::logic_error("observe() without a pending act()");
  if (realized_state != script_[static_cast<std::size_t>(rounds_done_)])
    throw std::invalid_argument("realized state differs from the script");
  learner_.observe(realized_state);
  ++rounds_done_;
  armed_ = false;
}

}  // namespace palab
