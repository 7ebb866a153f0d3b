#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "palab/game.hpp"
#include "palab/rng.hpp"

using namespace palab;

namespace {

// Two-action linear game used throughout: a1 produces value 1 at cost 1/4,
// a2 produces value 2 at cost 1/2, one state of nature.
LinearContractGame two_action_game(std::vector<double> benchmarks = {0.25, 0.5}) {
  return LinearContractGame({"a1", "a2"}, {0.25, 0.5}, {1.0, 2.0}, {{0}, {1}},
                            std::move(benchmarks));
}

}  // namespace

TEST_CASE("forecast validation") {
  CHECK(forecast_valid({1.0}));
  CHECK(forecast_valid({0.5, 0.5}));
  CHECK(forecast_valid({0.2, 0.3, 0.5}));
  CHECK_FALSE(forecast_valid({}));
  CHECK_FALSE(forecast_valid({0.6, 0.5}));
  CHECK_FALSE(forecast_valid({-0.1, 1.1}));
  CHECK_FALSE(forecast_valid({0.5, 0.4}));
}

TEST_CASE("policy registry interns by value") {
  PolicyRegistry reg;
  int id0 = reg.intern(Policy{{0.25}});
  int id1 = reg.intern(Policy{{0.5}});
  int id2 = reg.intern(Policy{{0.25}});
  CHECK(id0 == 0);
  CHECK(id1 == 1);
  CHECK(id2 == 0);
  CHECK(reg.size() == 2);
  CHECK(reg.at(1).params[0] == doctest::Approx(0.5));
  // Sub-rounding-noise parameter differences collapse to the same id.
  int id3 = reg.intern(Policy{{0.25 + 1e-14}});
  CHECK(id3 == 0);
}

TEST_CASE("two-action linear game payoffs at the tie contract") {
  auto g = two_action_game();
  CHECK(g.num_actions() == 2);
  CHECK(g.num_states() == 1);
  CHECK(g.min_cost_gap() == doctest::Approx(0.25));
  Policy quarter{{0.25}};
  Forecast pi{1.0};
  // p = 1/4 leaves both actions with zero expected agent utility.
  auto [u1, v1] = expected_utilities(g, 0, quarter, pi);
  auto [u2, v2] = expected_utilities(g, 1, quarter, pi);
  CHECK(u1 == doctest::Approx(0.0));
  CHECK(u2 == doctest::Approx(0.0));
  CHECK(v1 == doctest::Approx(0.75));
  CHECK(v2 == doctest::Approx(1.5));
  auto br = best_response_set(g, quarter, pi, 0.0);
  CHECK(br == std::vector<int>{0, 1});
  CHECK(optimistic_best_response(g, quarter, pi, 0.0) == 1);

  Policy half{{0.5}};
  auto [u1h, v1h] = expected_utilities(g, 0, half, pi);
  auto [u2h, v2h] = expected_utilities(g, 1, half, pi);
  CHECK(u1h == doctest::Approx(0.25));
  CHECK(u2h == doctest::Approx(0.5));
  CHECK(v2h == doctest::Approx(1.0));
  CHECK(best_response_set(g, half, pi, 0.0) == std::vector<int>{1});
  CHECK(optimistic_best_response(g, half, pi, 0.0) == 1);

  // At the tie the high-value action yields the principal 3/2 > 1 at p = 1/2,
  // so the benchmark scan picks the lower contract.
  CHECK(principal_best_policy_index(g, pi) == 0);
}

TEST_CASE("comparisons absorb sub-tolerance perturbations") {
  auto g = two_action_game();
  Forecast pi{1.0};
  // Just above the tie, within the shared tolerance: still a tie.
  Policy near_tie{{0.25 + 5e-10}};
  auto br = best_response_set(g, near_tie, pi, 0.0);
  CHECK(br.size() == 2);
  // Clearly above the tolerance: the high action wins outright.
  Policy above{{0.25 + 1e-6}};
  CHECK(best_response_set(g, above, pi, 0.0) == std::vector<int>{1});
}

TEST_CASE("expected outcome values against a forecast") {
  // Two states; a1 yields value 1 in both, a2 yields 2 only in state 0.
  LinearContractGame g({"a1", "a2"}, {0.25, 0.5}, {0.0, 1.0, 2.0}, {{1, 1}, {2, 0}}, {0.5});
  Forecast pi{0.25, 0.75};
  auto f = g.expected_outcome_values(pi);
  CHECK(f[0] == doctest::Approx(1.0));
  CHECK(f[1] == doctest::Approx(0.5));
}

TEST_CASE("persuasion action encoding round-trips") {
  PersuasionGame g({"acquit", "convict"}, {{1.0, 0.0}, {0.0, 1.0}}, {0.0, 1.0}, {});
  CHECK(g.num_strategies() == 2);
  CHECK(g.num_actions() == 4);
  CHECK(g.identity_action() == 2);
  // action 2 plays strategy 0 on signal 0 and strategy 1 on signal 1
  CHECK(g.map_strategy(2, 0) == 0);
  CHECK(g.map_strategy(2, 1) == 1);
  CHECK(g.map_strategy(1, 0) == 1);
  CHECK(g.map_strategy(1, 1) == 0);

  PersuasionGame g3({"x", "y", "z"},
                    {{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}}, {0.0, 0.5, 1.0}, {});
  CHECK(g3.num_actions() == 27);
  CHECK(g3.identity_action() == 0 + 1 * 3 + 2 * 9);
  for (int s = 0; s < 3; ++s) CHECK(g3.map_strategy(g3.identity_action(), s) == s);
}

TEST_CASE("persuasion payoffs under a full-information scheme") {
  PersuasionGame g({"acquit", "convict"}, {{1.0, 0.0}, {0.0, 1.0}}, {0.0, 1.0}, {});
  // Signal 0 in state 0, signal 1 in state 1; params row-major p(s|y).
  Policy full{{1.0, 0.0, 0.0, 1.0}};
  int id = g.identity_action();
  CHECK(g.agent_payoff(id, full, 0) == doctest::Approx(1.0));
  CHECK(g.agent_payoff(id, full, 1) == doctest::Approx(1.0));
  CHECK(g.principal_payoff(id, full, 0) == doctest::Approx(0.0));
  CHECK(g.principal_payoff(id, full, 1) == doctest::Approx(1.0));
  Forecast pi{0.7, 0.3};
  auto [u, v] = expected_utilities(g, id, full, pi);
  CHECK(u == doctest::Approx(1.0));
  CHECK(v == doctest::Approx(0.3));
  // The uninformative scheme sends signal 0 always.
  Policy blind = g.no_info_scheme(0);
  CHECK(blind.params == std::vector<double>{1.0, 0.0, 1.0, 0.0});
}

TEST_CASE("persuasion payoffs under the discretized low-prior scheme") {
  // Conviction recommendation always in state 1; in state 0 with probability
  // 27/77 (acquittal recommendation otherwise).  Prior weight 0.3 on state 1.
  PersuasionGame g({"acquit", "convict"}, {{1.0, 0.0}, {0.0, 1.0}}, {0.0, 1.0}, {});
  Policy scheme{{50.0 / 77.0, 27.0 / 77.0, 0.0, 1.0}};
  Forecast pi{0.7, 0.3};
  const int a00 = 0, a10 = 1, id = 2, a11 = 3;
  CHECK(expected_utilities(g, a00, scheme, pi).first == doctest::Approx(0.7));
  CHECK(expected_utilities(g, a10, scheme, pi).first == doctest::Approx(0.7 * 27.0 / 77.0));
  CHECK(expected_utilities(g, id, scheme, pi).first ==
        doctest::Approx(0.7 * 50.0 / 77.0 + 0.3));
  CHECK(expected_utilities(g, a11, scheme, pi).first == doctest::Approx(0.3));
  // Obeying the recommendations is the unique best response, with margin.
  CHECK(best_response_set(g, scheme, pi, 0.0) == std::vector<int>{id});
  CHECK(optimistic_best_response(g, scheme, pi, 0.0) == id);
  double u_id = expected_utilities(g, id, scheme, pi).first;
  CHECK(u_id - expected_utilities(g, a00, scheme, pi).first == doctest::Approx(3.0 / 55.0));
  // Principal's value from obedience equals the stabilized closure at 0.3.
  CHECK(expected_utilities(g, id, scheme, pi).second == doctest::Approx(6.0 / 11.0));
  // Widening the tolerance window admits the all-acquit deviation first.
  auto br6 = best_response_set(g, scheme, pi, 0.06);
  CHECK(br6 == std::vector<int>{a00, id});
}

TEST_CASE("tabular game lookups") {
  // u[action][policy][state], v likewise.
  TabularGame g({{{0.0, 1.0}, {0.5, 0.5}}, {{1.0, 0.0}, {0.25, 0.75}}},
                {{{1.0, 0.0}, {0.0, 1.0}}, {{0.5, 0.5}, {1.0, 0.0}}}, {0, 1});
  CHECK(g.num_actions() == 2);
  CHECK(g.num_states() == 2);
  CHECK(g.num_policies() == 2);
  CHECK(g.agent_payoff(1, g.policy(0), 0) == doctest::Approx(1.0));
  CHECK(g.agent_payoff(0, g.policy(1), 1) == doctest::Approx(0.5));
  CHECK(g.principal_payoff(1, g.policy(1), 0) == doctest::Approx(1.0));
  CHECK(g.benchmarks().size() == 2);
}

TEST_CASE("expectations agree with direct summation on random tables") {
  auto rng = make_stream(20250819, 0);
  for (int trial = 0; trial < 1000; ++trial) {
    int na = 2 + static_cast<int>(uniform01(rng) * 4);
    int np = 1 + static_cast<int>(uniform01(rng) * 3);
    int ny = 2 + static_cast<int>(uniform01(rng) * 3);
    std::vector<std::vector<std::vector<double>>> u(na), v(na);
    for (int a = 0; a < na; ++a) {
      u[a].resize(np);
      v[a].resize(np);
      for (int p = 0; p < np; ++p)
        for (int y = 0; y < ny; ++y) {
          u[a][p].push_back(2.0 * uniform01(rng) - 1.0);
          v[a][p].push_back(2.0 * uniform01(rng) - 1.0);
        }
    }
    TabularGame g(u, v, {0});
    Forecast pi(ny);
    double total = 0.0;
    for (int y = 0; y < ny; ++y) {
      pi[y] = uniform01(rng) + 1e-3;
      total += pi[y];
    }
    for (int y = 0; y < ny; ++y) pi[y] /= total;
    int a = static_cast<int>(uniform01(rng) * na);
    int p = static_cast<int>(uniform01(rng) * np);
    auto [eu, ev] = expected_utilities(g, a, g.policy(p), pi);
    double su = 0.0, sv = 0.0;
    for (int y = 0; y < ny; ++y) {
      su += pi[y] * u[a][p][y];
      sv += pi[y] * v[a][p][y];
    }
    CHECK(eu == doctest::Approx(su).epsilon(1e-12));
    CHECK(ev == doctest::Approx(sv).epsilon(1e-12));
    // Payoffs built from [-1,1] entries stay in [-1,1] in expectation.
    CHECK(std::abs(eu) <= 1.0 + 1e-9);
    CHECK(std::abs(ev) <= 1.0 + 1e-9);
  }
}

TEST_CASE("best-response sets grow with the tolerance") {
  auto rng = make_stream(20250819, 1);
  for (int trial = 0; trial < 500; ++trial) {
    int na = 2 + static_cast<int>(uniform01(rng) * 5);
    std::vector<double> costs;
    for (int a = 0; a < na; ++a) costs.push_back(uniform01(rng));
    std::sort(costs.begin(), costs.end());
    bool distinct = true;
    for (int a = 1; a < na; ++a)
      if (costs[a] - costs[a - 1] < 1e-3) distinct = false;
    if (!distinct) continue;
    std::vector<double> values;
    std::vector<std::vector<int>> outcome_of;
    for (int a = 0; a < na; ++a) {
      values.push_back(uniform01(rng));
      outcome_of.push_back({a});
    }
    LinearContractGame g({}, costs, values, outcome_of, {0.5});
    Policy p{{uniform01(rng)}};
    Forecast pi{1.0};
    double e1 = 0.2 * uniform01(rng);
    double e2 = e1 + 0.2 * uniform01(rng);
    auto s1 = best_response_set(g, p, pi, e1);
    auto s2 = best_response_set(g, p, pi, e2);
    CHECK(std::includes(s2.begin(), s2.end(), s1.begin(), s1.end()));
    int star = optimistic_best_response(g, p, pi, e1);
    CHECK(std::find(s1.begin(), s1.end(), star) != s1.end());
    // The optimistic pick maximizes V within the set.
    double v_star = expected_utilities(g, star, p, pi).second;
    for (int a : s1)
      CHECK(expected_utilities(g, a, p, pi).second <= v_star + kTieTolerance);
    // Agent and principal payoffs stay within unit range for unit-range
    // values and costs.
    for (int a = 0; a < na; ++a) {
      auto [u, v] = expected_utilities(g, a, p, pi);
      CHECK(u >= -1.0 - 1e-9);
      CHECK(u <= 1.0 + 1e-9);
      CHECK(v >= -1e-9);
      CHECK(v <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(LinearContractGame({}, {0.25, 0.25}, {1.0, 2.0}, {{0}, {1}}, {0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LinearContractGame({}, {0.25, 0.5}, {1.0}, {{0}, {1}}, {0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LinearContractGame({}, {0.25, 0.5}, {1.0, 2.0}, {{0}, {1}}, {1.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(PersuasionGame({"a"}, {{1.0, 0.0}, {0.0, 1.0}}, {0.0}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(expected_utilities(two_action_game(), 5, Policy{{0.5}}, Forecast{1.0}),
                  std::domain_error);
  CHECK_THROWS_AS(expected_utilities(two_action_game(), 0, Policy{{0.5}}, Forecast{0.5, 0.5}),
                  std::domain_error);
}
