#include "palab/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "palab/game.hpp"
#include "palab/oracle.hpp"
#include "palab/rng.hpp"
#include "palab/sampling.hpp"

namespace palab {

namespace {

// Fixed per-suite stream ids keep the suites independent of one another and
// of the order they run in.
constexpr std::uint64_t kTieStream = 101;
constexpr std::uint64_t kGapStream = 102;
constexpr std::uint64_t kMonoStream = 103;
constexpr std::uint64_t kClosureStream = 104;
constexpr std::uint64_t kContractStream = 105;
constexpr std::uint64_t kSignalStream = 106;

LemmaResult tie_count_suite(long long cases, std::uint64_t seed) {
  LemmaResult res{"tie-count", 0, 0};
  auto rng = make_stream(seed, kTieStream);
  for (long long trial = 0; trial < cases; ++trial) {
    int ny = 1 + static_cast<int>(uniform01(rng) * 3);
    auto game = random_linear_game(rng, 2, 4, ny);
    auto pi = random_forecast(rng, ny);
    auto ties = multi_response_contracts(game, pi);
    ++res.cases;
    bool ok = static_cast<int>(ties.size()) <= game.num_actions() - 1;
    for (double p : ties)
      ok = ok && best_response_set(game, Policy{{p}}, pi, 0.0).size() >= 2;
    if (!ok) ++res.failures;
  }
  return res;
}

LemmaResult gap_margin_suite(long long cases, std::uint64_t seed) {
  LemmaResult res{"gap-margin", 0, 0};
  auto rng = make_stream(seed, kGapStream);
  // The margin property only speaks about contracts whose best response is
  // the same unique action on both sides of a beta-window, so draws that do
  // not produce that configuration are discarded (with a generous cap).
  for (long long trial = 0; trial < 50 * cases && res.cases < cases; ++trial) {
    int ny = 1 + static_cast<int>(uniform01(rng) * 2);
    auto game = random_linear_game(rng, 2, 4, ny);
    auto pi = random_forecast(rng, ny);
    double beta = 0.01 + 0.29 * uniform01(rng);
    double pbar = beta + (1.0 - 2.0 * beta) * uniform01(rng);
    auto below = best_response_set(game, Policy{{pbar - beta}}, pi, 0.0);
    auto above = best_response_set(game, Policy{{pbar + beta}}, pi, 0.0);
    std::vector<int> common;
    std::set_intersection(below.begin(), below.end(), above.begin(), above.end(),
                          std::back_inserter(common));
    if (common.size() != 1) continue;
    ++res.cases;
    int star = common[0];
    double u_star = expected_utilities(game, star, Policy{{pbar}}, pi).first;
    for (int a = 0; a < game.num_actions(); ++a) {
      if (a == star) continue;
      double u = expected_utilities(game, a, Policy{{pbar}}, pi).first;
      if (u_star - u < game.min_cost_gap() * beta - 1e-9) {
        ++res.failures;
        break;
      }
    }
  }
  return res;
}

LemmaResult monotonicity_suite(long long cases, std::uint64_t seed) {
  LemmaResult res{"monotonicity", 0, 0};
  auto rng = make_stream(seed, kMonoStream);
  for (long long trial = 0; trial < cases; ++trial) {
    int ny = 1 + static_cast<int>(uniform01(rng) * 3);
    auto game = random_linear_game(rng, 2, 4, ny);
    auto pi = random_forecast(rng, ny);
    double a = uniform01(rng), b = uniform01(rng);
    double eps = 0.3 * uniform01(rng);
    ++res.cases;
    if (!check_monotonicity(game, pi, std::max(a, b), std::min(a, b), eps)) ++res.failures;
  }
  return res;
}

LemmaResult closure_shape_suite(long long cases, std::uint64_t seed) {
  LemmaResult res{"closure-shape", 0, 0};
  auto rng = make_stream(seed, kClosureStream);
  for (long long trial = 0; trial < cases; ++trial) {
    auto game = random_persuasion_game(rng, 2, 4);
    auto env = build_envelope(game);
    auto closure = concave_closure(game, env);
    ++res.cases;
    bool ok = true;
    double prev = -1e300, cur = -1e300;
    for (int k = 0; k <= 300 && ok; ++k) {
      double mu = k / 300.0;
      int iv = env.interval_at(mu);
      double pointwise =
          game.strategy_principal_value(env.intervals[static_cast<std::size_t>(iv)].strategy);
      double next = closure.evaluate(mu);
      if (next < pointwise - 1e-9) ok = false;
      if (k >= 2 && cur < (prev + next) / 2.0 - 1e-9) ok = false;
      prev = cur;
      cur = next;
    }
    if (!ok) ++res.failures;
  }
  return res;
}

LemmaResult contract_stability_suite(long long cases, std::uint64_t seed, bool flip) {
  LemmaResult res{"contract-stability", 0, 0};
  auto rng = make_stream(seed, kContractStream);
  for (long long trial = 0; trial < cases; ++trial) {
    int ny = 1 + static_cast<int>(uniform01(rng) * 2);
    auto game = random_linear_game(rng, 2, 4, ny);
    auto pi = random_forecast(rng, ny);
    double beta = 0.02 + 0.48 * uniform01(rng);
    double delta_raw = 0.01 + (beta - 0.01) * uniform01(rng);
    double delta = 1.0 / std::ceil(1.0 / delta_raw);
    LinearOracleParams params{beta, delta};
    auto out = linear_stable_oracle(game, pi, params);
    double slack = game.num_actions() * (beta + delta);
    ++res.cases;
    bool stable = is_stable(game, Policy{{out.contract}}, pi, out.eps, 0.0).stable;
    if (flip) stable = !stable;
    bool ok = stable &&
              is_optimal_stable(game, Policy{{out.contract}}, pi, slack + kTieTolerance,
                                out.eps, out.eps, 0.0) &&
              out.contract <= out.p_optimistic + slack + kTieTolerance;
    if (!ok) ++res.failures;
  }
  return res;
}

LemmaResult signal_stability_suite(long long cases, std::uint64_t seed, bool flip) {
  LemmaResult res{"signal-stability", 0, 0};
  auto rng = make_stream(seed, kSignalStream);
  for (long long trial = 0; trial < cases; ++trial) {
    auto game = random_persuasion_game(rng, 2, 3);
    auto env = build_envelope(game);
    PersuasionOracleParams params;
    params.beta = env.min_length / 8.0;
    params.x = std::min(1.0, params.beta);
    params.delta = params.beta * params.beta / 16.0;
    double mu = uniform01(rng);
    auto out = persuasion_stable_oracle(game, mu, params);
    auto guarantee = persuasion_guarantee(env, params, 0.0);
    Forecast pi{1.0 - mu, mu};
    ++res.cases;
    bool stable =
        is_stable(game, out.scheme.to_policy(), pi, guarantee.beta, guarantee.gamma).stable;
    if (flip) stable = !stable;
    bool ok = stable;
    for (int y = 0; y < 2 && ok; ++y) {
      double col = 0.0;
      for (int s = 0; s < game.num_strategies(); ++s) col += out.scheme.at(s, y);
      ok = std::fabs(col - 1.0) <= 1e-9;
    }
    ok = ok && std::fabs(out.posteriors.implied_prior() - mu) <= 1e-9;
    if (!ok) ++res.failures;
  }
  return res;
}

}  // namespace

std::vector<LemmaResult> run_lemma_suites(long long cases_per_suite, std::uint64_t seed,
                                          LemmaMutation mutation) {
  bool flip = mutation == LemmaMutation::kFlipStability;
  std::vector<LemmaResult> out;
  out.push_back(tie_count_suite(cases_per_suite, seed));
  out.push_back(gap_margin_suite(cases_per_suite, seed));
  out.push_back(monotonicity_suite(cases_per_suite, seed));
  out.push_back(closure_shape_suite(cases_per_suite, seed));
  out.push_back(contract_stability_suite(cases_per_suite, seed, flip));
  out.push_back(signal_stability_suite(cases_per_suite, seed, flip));
  return out;
}

}  // namespace palab
