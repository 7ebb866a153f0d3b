#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "doctest.h"
#include "palab/agents.hpp"
#include "palab/game.hpp"
#include "palab/rng.hpp"

using namespace palab;

namespace {

// Two-state work/shirk contract game: the task completes (outcome value 2)
// only when the agent works in the medium state.  States: 0 = M, 1 = H.
LinearContractGame work_shirk_game() {
  return LinearContractGame({"work", "shirk"}, {1.0, 0.0}, {0.0, 2.0},
                            {{1, 0}, {0, 0}}, {0.5, 0.6}, {"M", "H"});
}

struct Row {
  Policy policy;
  int pid = 0;
  int rec = 0;
  int action = 0;
  int y = 0;
};

// Transcript-only swap regret: per (policy id, rec, played action) cell, the
// best fixed deviation's utility minus the realized utility.
double swap_total(const Game& g, const std::vector<Row>& rows) {
  std::map<std::tuple<int, int, int>, std::vector<double>> dev;
  for (const Row& r : rows) {
    auto& v = dev[{r.pid, r.rec, r.action}];
    if (v.empty()) v.assign(g.num_actions(), 0.0);
    for (int j = 0; j < g.num_actions(); ++j)
      v[j] += g.agent_payoff(j, r.policy, r.y);
  }
  double total = 0.0;
  for (auto& [cell, v] : dev)
    total += *std::max_element(v.begin(), v.end()) - v[std::get<2>(cell)];
  return total;
}

// Realized utility minus the best fixed context -> action map.
double neg_total(const Game& g, const std::vector<Row>& rows) {
  double realized = 0.0;
  std::map<std::pair<int, int>, std::vector<double>> ctx;
  for (const Row& r : rows) {
    realized += g.agent_payoff(r.action, r.policy, r.y);
    auto& v = ctx[{r.pid, r.rec}];
    if (v.empty()) v.assign(g.num_actions(), 0.0);
    for (int j = 0; j < g.num_actions(); ++j)
      v[j] += g.agent_payoff(j, r.policy, r.y);
  }
  double best = 0.0;
  for (auto& [key, v] : ctx) best += *std::max_element(v.begin(), v.end());
  return realized - best;
}

}  // namespace

TEST_CASE("follower plays the recommendation") {
  FollowerAgent follower;
  Policy p{{0.25}};
  CHECK(follower.act(p, 0, 1) == 1);
  CHECK(follower.act(p, 3, 0) == 0);
  follower.observe(1);  // no state, no effect
  CHECK(follower.kind() == "follower");
}

TEST_CASE("balanced threshold matches the formula") {
  CHECK(balanced_threshold(2) ==
        doctest::Approx(7.0644601350928475).epsilon(1e-12));
  CHECK(balanced_threshold(1 << 10) ==
        doctest::Approx(259.707656373495).epsilon(1e-12));
  CHECK(balanced_threshold(1 << 14) ==
        doctest::Approx(1095.9593736777547).epsilon(1e-12));
  CHECK(balanced_threshold(1 << 16) ==
        doctest::Approx(2236.374833673406).epsilon(1e-12));
  // o(T): the per-round allowance shrinks.
  CHECK(balanced_threshold(1 << 16) / (1 << 16) <
        balanced_threshold(1 << 10) / (1 << 10));
  CHECK_THROWS_AS(balanced_threshold(1), std::invalid_argument);
}

TEST_CASE("fresh contexts mix uniformly and ties stay uniform") {
  LinearContractGame g = work_shirk_game();
  SwapLearnerAgent agent(g, 11, 0);
  int a = agent.act(Policy{{0.5}}, 0, 0);
  CHECK((a == 0 || a == 1));
  REQUIRE(agent.last_mixture().size() == 2);
  CHECK(agent.last_mixture()[0] == 0.5);
  CHECK(agent.last_mixture()[1] == 0.5);
  CHECK(agent.last_residual() <= 1e-8);
  CHECK_THROWS_AS(agent.act(Policy{{0.5}}, 0, 0), std::logic_error);
  agent.observe(0);
  CHECK_THROWS_AS(agent.observe(0), std::logic_error);

  // Identical utilities never break the symmetry.
  TabularGame flat({{{0.3}}, {{0.3}}}, {{{0.1}}, {{0.1}}}, {0});
  SwapLearnerAgent tied(flat, 5, 1);
  for (int t = 0; t < 300; ++t) {
    tied.act(flat.policy(0), 0, 0);
    CHECK(tied.last_mixture()[0] == 0.5);
    tied.observe(0);
  }
}

TEST_CASE("learner concentrates on a dominant action") {
  TabularGame g({{{1.0}}, {{0.0}}}, {{{0.0}}, {{0.0}}}, {0});
  SwapLearnerAgent agent(g, 7, 2);
  for (int t = 0; t < 1000; ++t) {
    agent.act(g.policy(0), 0, 0);
    agent.observe(0);
  }
  agent.act(g.policy(0), 0, 0);
  CHECK(agent.last_mixture()[0] >= 0.95);
  agent.observe(0);
}

TEST_CASE("swap regret meets the reduction bound under adversarial flips") {
  // Action i pays exactly in state i; the stream always realizes the state
  // of the currently less-favored action.
  TabularGame g({{{1.0, 0.0}}, {{0.0, 1.0}}}, {{{0.0, 0.0}}, {{0.0, 0.0}}},
                {0});
  SwapLearnerAgent agent(g, 13, 3);
  std::vector<Row> rows;
  const int kT = 1 << 14;
  for (int t = 0; t < kT; ++t) {
    int a = agent.act(g.policy(0), 0, 0);
    CHECK(agent.last_residual() <= 1e-8);
    int y = agent.last_mixture()[0] >= agent.last_mixture()[1] ? 1 : 0;
    agent.observe(y);
    rows.push_back({g.policy(0), 0, 0, a, y});
  }
  double internal = agent.internal_swap_total();
  double bound = 3.0 * std::sqrt(std::log(2.0) * 2.0 / kT);
  CHECK(internal / kT <= bound);
  // The learner's own accounting is reproducible from the transcript alone.
  CHECK(std::fabs(internal - swap_total(g, rows)) <= 1e-9);
}

TEST_CASE("per-context regret vanishes on each subsequence") {
  // Two policies with opposite dominant actions, played alternately.
  TabularGame g({{{1.0}, {0.0}}, {{0.0}, {1.0}}}, {{{0.0}, {0.0}}, {{0.0}, {0.0}}},
                {0, 1});
  SwapLearnerAgent agent(g, 17, 4);
  const int kT = 1 << 12;
  for (int t = 0; t < kT; ++t) {
    int pid = t % 2;
    agent.act(g.policy(pid), pid, 0);
    agent.observe(0);
  }
  std::vector<ContextAudit> audits = agent.context_audits();
  REQUIRE(audits.size() == 2);
  double per_ctx_bound = 3.0 * std::sqrt(std::log(2.0) * 2.0 / (kT / 2));
  for (const ContextAudit& audit : audits) {
    CHECK(audit.rounds == kT / 2);
    CHECK(audit.swap_gain / audit.rounds <= per_ctx_bound);
  }
}

TEST_CASE("adversary cooperates exactly while the trigger holds") {
  LinearContractGame g = work_shirk_game();
  std::vector<int> script;
  for (int t = 0; t < 64; ++t) script.push_back(t % 2);  // M,H,M,H,...
  AdversaryLAgent adv(g, script, 3, 0);
  CHECK(adv.trigger_contract() == 0.5);
  CHECK(adv.kind() == "adversary-L");
  Policy p{{0.5}};
  for (int t = 1; t <= 64; ++t) {
    int a = adv.act(p, 0, 0);
    if (t == 1) {
      CHECK(a == 1);  // scripted first-round shirk
    } else {
      CHECK(a == (script[t - 1] == 0 ? 0 : 1));  // work exactly on M
    }
    CHECK(adv.phase() == AdversaryLAgent::Phase::kCooperate);
    adv.observe(script[t - 1]);
  }
  CHECK_THROWS_AS(adv.act(p, 0, 0), std::out_of_range);

  AdversaryLAgent fresh(g, script, 3, 1);
  fresh.act(p, 0, 0);
  CHECK_THROWS_AS(fresh.observe(1), std::invalid_argument);
}

TEST_CASE("high first state switches the trigger and adds the work coin") {
  LinearContractGame g = work_shirk_game();
  const int kT = 1 << 12;
  std::vector<int> script = {1};  // first state H
  for (int t = 1; t < kT; ++t) script.push_back(t % 2 == 0 ? 1 : 0);
  AdversaryLAgent adv(g, script, 19, 2);
  CHECK(adv.trigger_contract() == 0.6);
  Policy p{{0.6}};
  std::int64_t high_rounds = 0, high_work = 0;
  for (int t = 1; t <= kT; ++t) {
    int a = adv.act(p, 0, 0);
    if (t > 1) {
      if (script[t - 1] == 0) {
        CHECK(a == 0);  // medium states always get work
      } else {
        ++high_rounds;
        if (a == 0) ++high_work;
      }
    }
    adv.observe(script[t - 1]);
  }
  CHECK(adv.phase() == AdversaryLAgent::Phase::kCooperate);
  double freq = static_cast<double>(high_work) / high_rounds;
  CHECK(freq >= 0.15);
  CHECK(freq <= 0.25);

  // Round one is scripted shirk with no pair check; the trigger only starts
  // binding at round two, where the 0.5 contract misses this adversary's 0.6.
  AdversaryLAgent other(g, script, 19, 3);
  other.act(Policy{{0.5}}, 1, 0);
  other.observe(1);
  CHECK(other.phase() == AdversaryLAgent::Phase::kCooperate);
  other.act(Policy{{0.5}}, 1, 0);
  CHECK(other.phase() == AdversaryLAgent::Phase::kNoRegret);
}

TEST_CASE("deviation or imbalance defects permanently") {
  LinearContractGame g = work_shirk_game();
  std::vector<int> script;
  for (int t = 0; t < 64; ++t) script.push_back(t % 2);
  AdversaryLAgent adv(g, script, 23, 0);
  Policy p{{0.5}};
  for (int t = 1; t <= 6; ++t) {
    adv.act(p, 0, 0);
    adv.observe(script[t - 1]);
    CHECK(adv.phase() == AdversaryLAgent::Phase::kCooperate);
  }
  adv.act(p, 0, 1);  // recommendation flips to shirk on round 7
  CHECK(adv.phase() == AdversaryLAgent::Phase::kNoRegret);
  adv.observe(script[6]);
  for (int t = 8; t <= 64; ++t) {
    int a = adv.act(p, 0, 0);  // back on the trigger pair, but too late
    CHECK((a == 0 || a == 1));
    CHECK(adv.phase() == AdversaryLAgent::Phase::kNoRegret);
    adv.observe(script[t - 1]);
  }

  // An all-medium script breaks the balance bound at round 60.
  std::vector<int> lopsided(64, 0);
  AdversaryLAgent skew(g, lopsided, 23, 1);
  CHECK(skew.balanced_at(59));
  CHECK_FALSE(skew.balanced_at(60));
  for (int t = 1; t <= 64; ++t) {
    skew.act(p, 0, 0);
    if (t < 60) {
      CHECK(skew.phase() == AdversaryLAgent::Phase::kCooperate);
    } else {
      CHECK(skew.phase() == AdversaryLAgent::Phase::kNoRegret);
    }
    skew.observe(0);
  }
}

TEST_CASE("full cooperation leaves zero swap and negative regret") {
  LinearContractGame g = work_shirk_game();
  const int kT = 1 << 13;
  std::mt19937_64 states = make_stream(41, 0);
  std::vector<int> script = {0};  // pinned medium first state
  for (int t = 1; t < kT; ++t) script.push_back(uniform01(states) < 0.5 ? 0 : 1);
  AdversaryLAgent adv(g, script, 41, 1);
  Policy p{{0.5}};
  std::vector<Row> rows;
  for (int t = 1; t <= kT; ++t) {
    int a = adv.act(p, 0, 0);
    adv.observe(script[t - 1]);
    rows.push_back({p, 0, 0, a, script[t - 1]});
  }
  REQUIRE(adv.phase() == AdversaryLAgent::Phase::kCooperate);
  // work-iff-medium under contract 0.5 ties every deviation exactly.
  CHECK(std::fabs(swap_total(g, rows)) <= 1e-12);
  CHECK(std::fabs(neg_total(g, rows)) <= 1e-12);
}

TEST_CASE("defected adversary inherits the learner's regret envelope") {
  LinearContractGame g = work_shirk_game();
  const int kT = 1 << 13;
  std::mt19937_64 states = make_stream(43, 0);
  std::vector<int> script = {0};
  for (int t = 1; t < kT; ++t) script.push_back(uniform01(states) < 0.5 ? 0 : 1);
  AdversaryLAgent adv(g, script, 43, 1);
  Policy p{{0.5}};
  std::vector<Row> rows;
  for (int t = 1; t <= kT; ++t) {
    int a = adv.act(p, 0, 1);  // recommendation shirk: never the trigger pair
    adv.observe(script[t - 1]);
    rows.push_back({p, 0, 1, a, script[t - 1]});
  }
  CHECK(adv.phase() == AdversaryLAgent::Phase::kNoRegret);
  CHECK(swap_total(g, rows) / kT <= 0.05);
  CHECK(neg_total(g, rows) / kT >= -0.05);
}
