#include "palab/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "palab/rng.hpp"

namespace palab {

Forecast random_forecast(std::mt19937_64& rng, int num_states, double floor) {
  Forecast pi(static_cast<std::size_t>(num_states));
  double total = 0.0;
  for (auto& p : pi) {
    p = floor + uniform01(rng);
    total += p;
  }
  for (auto& p : pi) p /= total;
  return pi;
}

LinearContractGame random_linear_game(std::mt19937_64& rng, int min_actions, int max_actions,
                                      int num_states, int num_benchmarks) {
  int na = min_actions + static_cast<int>(uniform01(rng) * (max_actions - min_actions + 1));
  na = std::min(na, max_actions);
  // Costs: sorted draws pushed apart so the minimum gap is at least 0.02.
  std::vector<double> costs(static_cast<std::size_t>(na));
  for (auto& c : costs) c = 0.8 * uniform01(rng);
  std::sort(costs.begin(), costs.end());
  for (int a = 1; a < na; ++a)
    costs[static_cast<std::size_t>(a)] =
        std::max(costs[static_cast<std::size_t>(a)], costs[static_cast<std::size_t>(a - 1)] + 0.02);

  std::vector<double> values(static_cast<std::size_t>(na));
  for (auto& v : values) v = uniform01(rng);
  std::sort(values.begin(), values.end());

  std::vector<std::vector<int>> outcome_of(static_cast<std::size_t>(na));
  for (int a = 0; a < na; ++a) {
    for (int y = 0; y < num_states; ++y) {
      // Bias the diagonal so higher-cost actions tend to produce more value.
      int o = (uniform01(rng) < 0.6) ? a : static_cast<int>(uniform01(rng) * na);
      outcome_of[static_cast<std::size_t>(a)].push_back(std::min(o, na - 1));
    }
  }

  std::vector<double> benchmarks(static_cast<std::size_t>(num_benchmarks));
  for (auto& b : benchmarks) b = uniform01(rng);
  std::sort(benchmarks.begin(), benchmarks.end());
  return LinearContractGame({}, costs, values, outcome_of, benchmarks);
}

PersuasionGame random_persuasion_game(std::mt19937_64& rng, int min_strategies,
                                      int max_strategies) {
  int n = min_strategies + static_cast<int>(uniform01(rng) * (max_strategies - min_strategies + 1));
  n = std::min(n, max_strategies);

  // Interval lengths with bounded ratio, so every interval is at least
  // 1/(3n) long after normalization.
  std::vector<double> gaps(static_cast<std::size_t>(n));
  double total = 0.0;
  for (auto& g : gaps) {
    g = 0.5 + uniform01(rng);
    total += g;
  }
  std::vector<double> cuts;  // interior breakpoints
  double acc = 0.0;
  for (int i = 0; i + 1 < n; ++i) {
    acc += gaps[static_cast<std::size_t>(i)] / total;
    cuts.push_back(acc);
  }

  // Ascending slopes with gaps bounded away from zero, intercepts chosen so
  // consecutive lines meet exactly at the breakpoints: this makes strategy i
  // the unique argmax inside interval i by construction.
  std::vector<double> slope(static_cast<std::size_t>(n)), intercept(static_cast<std::size_t>(n));
  slope[0] = -1.0 + uniform01(rng);
  intercept[0] = uniform01(rng);
  for (int i = 1; i < n; ++i) {
    slope[static_cast<std::size_t>(i)] =
        slope[static_cast<std::size_t>(i - 1)] + 0.3 + 0.7 * uniform01(rng);
    double x = cuts[static_cast<std::size_t>(i - 1)];
    intercept[static_cast<std::size_t>(i)] =
        intercept[static_cast<std::size_t>(i - 1)] +
        (slope[static_cast<std::size_t>(i - 1)] - slope[static_cast<std::size_t>(i)]) * x;
  }

  // Map utilities affinely into [0,1]; this rescales slopes but keeps the
  // breakpoints (and hence the interval structure) unchanged.
  double lo = 1e300, hi = -1e300;
  for (int s = 0; s < n; ++s) {
    double u0 = intercept[static_cast<std::size_t>(s)];
    double u1 = u0 + slope[static_cast<std::size_t>(s)];
    lo = std::min(lo, std::min(u0, u1));
    hi = std::max(hi, std::max(u0, u1));
  }
  double range = std::max(hi - lo, 1e-9);

  std::vector<std::string> names;
  std::vector<std::vector<double>> u;
  std::vector<double> v;
  for (int s = 0; s < n; ++s) {
    names.push_back("s" + std::to_string(s));
    double u0 = (intercept[static_cast<std::size_t>(s)] - lo) / range;
    double u1 = (intercept[static_cast<std::size_t>(s)] + slope[static_cast<std::size_t>(s)] - lo) / range;
    u.push_back({u0, u1});
    v.push_back(uniform01(rng));
  }
  return PersuasionGame(names, u, v, {});
}

}  // namespace palab
