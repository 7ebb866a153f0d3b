#include "palab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace palab {

StabilityCertificate is_stable(const Game& game, const Policy& policy, const Forecast& pi,
                               double beta, double gamma) {
  if (beta < 0.0 || gamma < 0.0) throw std::invalid_argument("stability parameters must be >= 0");
  StabilityCertificate cert;
  cert.policy = policy;
  cert.beta = beta;
  cert.gamma = gamma;
  cert.best_action = optimistic_best_response(game, policy, pi, 0.0);
  auto [u_star, v_star] = expected_utilities(game, cert.best_action, policy, pi);
  cert.stable = true;
  for (int a = 0; a < game.num_actions(); ++a) {
    auto [u, v] = expected_utilities(game, a, policy, pi);
    ActionVerdict verdict;
    verdict.action = a;
    verdict.u_gap = u_star - u;
    verdict.v_gap = v_star - v;
    if (a == cert.best_action) {
      verdict.held = StabilityDisjunct::kBestResponse;
    } else if (u <= u_star - beta + kTieTolerance) {
      verdict.held = StabilityDisjunct::kAgentGap;
    } else if (gamma == 0.0 ? std::abs(v - v_star) <= kTieTolerance
                            : v >= v_star - gamma - kTieTolerance) {
      // gamma = 0 demands exact indifference (two-sided); see oracle.hpp.
      verdict.held = StabilityDisjunct::kPrincipalGap;
    } else {
      verdict.held = StabilityDisjunct::kViolated;
      cert.stable = false;
    }
    cert.verdicts.push_back(verdict);
  }
  return cert;
}

bool is_optimal_stable(const Game& game, const Policy& policy, const Forecast& pi, double c,
                       double eps, double beta, double gamma) {
  if (!is_stable(game, policy, pi, beta, gamma).stable) return false;
  int a_star = optimistic_best_response(game, policy, pi, 0.0);
  double v_star = expected_utilities(game, a_star, policy, pi).second;
  for (const Policy& p0 : game.benchmarks()) {
    int a0 = optimistic_best_response(game, p0, pi, eps);
    double v0 = expected_utilities(game, a0, p0, pi).second;
    if (v_star < v0 - c - kTieTolerance) return false;
  }
  return true;
}

std::vector<TieContract> tie_contracts(const LinearContractGame& game, const Forecast& pi) {
  auto f = game.expected_outcome_values(pi);
  std::vector<TieContract> out;
  for (int i = 0; i < game.num_actions(); ++i) {
    for (int j = i + 1; j < game.num_actions(); ++j) {
      double df = f[static_cast<std::size_t>(i)] - f[static_cast<std::size_t>(j)];
      if (std::abs(df) <= kTieTolerance) continue;  // parallel utilities never tie
      double p = (game.cost(i) - game.cost(j)) / df;
      if (p >= -kTieTolerance && p <= 1.0 + kTieTolerance)
        out.push_back({std::clamp(p, 0.0, 1.0), i, j});
    }
  }
  return out;
}

std::vector<double> multi_response_contracts(const LinearContractGame& game, const Forecast& pi) {
  std::vector<double> candidates;
  for (const auto& tie : tie_contracts(game, pi)) candidates.push_back(tie.contract);
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> out;
  for (double p : candidates) {
    if (!out.empty() && p - out.back() <= kTieTolerance) continue;
    if (best_response_set(game, Policy{{p}}, pi, 0.0).size() >= 2) out.push_back(p);
  }
  return out;
}

void LinearOracleParams::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("oracle beta must be positive");
  if (!(delta > 0.0) || delta > 1.0) throw std::invalid_argument("grid step must be in (0,1]");
  double k = 1.0 / delta;
  if (std::abs(k - std::llround(k)) > 1e-6)
    throw std::invalid_argument("grid step must evenly divide [0,1]");
}

double LinearOracleParams::eps(const LinearContractGame& game) const {
  return game.min_cost_gap() * beta / 2.0;
}

LinearOracleResult linear_stable_oracle(const LinearContractGame& game, const Forecast& pi,
                                        const LinearOracleParams& params) {
  params.validate();
  if (game.benchmarks().empty()) throw std::domain_error("benchmark policy set is empty");
  LinearOracleResult result;
  result.eps = params.eps(game);

  double best_v = -1e300;
  for (const Policy& p0 : game.benchmarks()) {
    int a0 = optimistic_best_response(game, p0, pi, result.eps);
    double v0 = expected_utilities(game, a0, p0, pi).second;
    if (v0 > best_v + kTieTolerance) {
      best_v = v0;
      result.p_optimistic = p0.params[0];
    }
  }

  auto total = std::llround(1.0 / params.delta);
  auto k0 = static_cast<long long>(std::ceil(result.p_optimistic / params.delta - 1e-9));
  for (long long k = std::max(0ll, k0); k <= total; ++k) {
    double p = (k == total) ? 1.0 : static_cast<double>(k) * params.delta;
    if (is_stable(game, Policy{{p}}, pi, result.eps, 0.0).stable) {
      result.contract = p;
      return result;
    }
  }
  result.contract = 1.0;  // the scan includes 1, where all principal payoffs vanish
  return result;
}

bool check_monotonicity(const LinearContractGame& game, const Forecast& pi, double p1, double p2,
                        double eps) {
  if (p1 < p2 - kTieTolerance) throw std::invalid_argument("contracts must satisfy p1 >= p2");
  auto f = game.expected_outcome_values(pi);
  auto best_f = [&](double p) {
    double best = -1e300;
    for (int a : best_response_set(game, Policy{{p}}, pi, eps))
      best = std::max(best, f[static_cast<std::size_t>(a)]);
    return best;
  };
  return best_f(p1) >= best_f(p2) - kTieTolerance;
}

// ---------------------------------------------------------------------------
// Persuasion
// ---------------------------------------------------------------------------

namespace {

struct Line {
  double intercept = 0.0;  // u(s, 0)
  double slope = 0.0;      // u(s, 1) - u(s, 0)
  int strategy = 0;
};

[[noreturn]] void never_optimal(const PersuasionGame& game, int s) {
  throw std::invalid_argument("strategy '" + game.strategy_names()[static_cast<std::size_t>(s)] +
                              "' is never uniquely optimal on [0,1]");
}

}  // namespace

int EnvelopeDecomposition::interval_at(double mu) const {
  for (std::size_t k = 0; k + 1 < intervals.size(); ++k)
    if (mu <= intervals[k].hi + kTieTolerance) return static_cast<int>(k);
  return static_cast<int>(intervals.size()) - 1;
}

int EnvelopeDecomposition::interval_of_strategy(int s) const {
  for (std::size_t k = 0; k < intervals.size(); ++k)
    if (intervals[k].strategy == s) return static_cast<int>(k);
  throw std::domain_error("strategy has no envelope interval");
}

EnvelopeDecomposition build_envelope(const PersuasionGame& game) {
  const int n = game.num_strategies();
  std::vector<Line> lines;
  for (int s = 0; s < n; ++s) {
    double u0 = game.strategy_agent_utility(s, 0);
    double u1 = game.strategy_agent_utility(s, 1);
    lines.push_back({u0, u1 - u0, s});
  }
  // Parallel utility lines leave the lower strategy without a unique argmax.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(lines[static_cast<std::size_t>(i)].slope -
                   lines[static_cast<std::size_t>(j)].slope) <= kTieTolerance) {
        int loser = lines[static_cast<std::size_t>(i)].intercept <=
                            lines[static_cast<std::size_t>(j)].intercept
                        ? i
                        : j;
        never_optimal(game, loser);
      }

  std::sort(lines.begin(), lines.end(),
            [](const Line& a, const Line& b) { return a.slope < b.slope; });

  // Upper envelope scan over lines in slope order; start[i] is where stack
  // entry i takes over from its left neighbor.
  std::vector<Line> stack;
  std::vector<double> start;
  for (const Line& line : lines) {
    double x = -1e300;
    while (!stack.empty()) {
      x = (stack.back().intercept - line.intercept) / (line.slope - stack.back().slope);
      if (x <= start.back() + 1e-15) {
        stack.pop_back();
        start.pop_back();
        x = -1e300;
      } else {
        break;
      }
    }
    start.push_back(stack.empty() ? -1e300 : x);
    stack.push_back(line);
  }

  EnvelopeDecomposition env;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    double lo = std::max(0.0, start[i]);
    double hi = std::min(1.0, i + 1 < start.size() ? start[i + 1] : 1e300);
    if (hi - lo > kTieTolerance) env.intervals.push_back({lo, hi, stack[i].strategy});
  }
  if (static_cast<int>(env.intervals.size()) != n) {
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& iv : env.intervals) seen[static_cast<std::size_t>(iv.strategy)] = true;
    for (int s = 0; s < n; ++s)
      if (!seen[static_cast<std::size_t>(s)]) never_optimal(game, s);
  }

  env.min_length = 1e300;
  for (const auto& iv : env.intervals) env.min_length = std::min(env.min_length, iv.hi - iv.lo);
  env.min_slope_gap = 1e300;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j)
      env.min_slope_gap = std::min(env.min_slope_gap, std::abs(lines[i].slope - lines[j].slope));
  if (n == 1) env.min_slope_gap = 1.0;  // no pairs; unused downstream
  double C = env.min_length, c1 = env.min_slope_gap;
  env.c2 = 2.0 * std::sqrt((1.0 / (c1 * C)) * (1.0 + 1.0 / C));
  return env;
}

namespace {

// Upper concave hull of points sorted by mu (distinct mu values); keeps only
// vertices, dropping collinear interior points.
std::vector<ClosurePoint> upper_hull(std::vector<ClosurePoint> pts) {
  std::vector<ClosurePoint> hull;
  for (const auto& p : pts) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      double t = (b.mu - a.mu) / (p.mu - a.mu);
      double chord = a.value + t * (p.value - a.value);
      if (b.value <= chord + 1e-15) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  return hull;
}

std::vector<ClosurePoint> dedupe_by_mu(std::vector<ClosurePoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const ClosurePoint& a, const ClosurePoint& b) {
    if (a.mu != b.mu) return a.mu < b.mu;
    if (a.value != b.value) return a.value > b.value;
    return a.strategy < b.strategy;
  });
  std::vector<ClosurePoint> out;
  for (const auto& p : pts) {
    if (!out.empty() && p.mu - out.back().mu <= 1e-12) continue;  // keep the best at each mu
    out.push_back(p);
  }
  return out;
}

}  // namespace

double ConcaveClosure::evaluate(double mu) const {
  mu = std::clamp(mu, 0.0, 1.0);
  if (mu <= points.front().mu) return points.front().value;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (mu <= points[i].mu + 1e-15) {
      const auto& a = points[i - 1];
      const auto& b = points[i];
      double t = (mu - a.mu) / (b.mu - a.mu);
      return a.value + t * (b.value - a.value);
    }
  }
  return points.back().value;
}

ConcaveClosure concave_closure(const PersuasionGame& game, const EnvelopeDecomposition& env) {
  std::vector<ClosurePoint> pts;
  for (const auto& iv : env.intervals) {
    double v = game.strategy_principal_value(iv.strategy);
    pts.push_back({iv.lo, v, iv.strategy});
    pts.push_back({iv.hi, v, iv.strategy});
  }
  ConcaveClosure closure;
  closure.points = upper_hull(dedupe_by_mu(std::move(pts)));
  return closure;
}

ConcaveClosure stabilize_closure(const PersuasionGame& game, const EnvelopeDecomposition& env,
                                 const ConcaveClosure& closure, double beta) {
  if (beta < 0.0) throw std::invalid_argument("stabilization shift must be >= 0");
  if (beta >= env.min_length / 4.0)
    throw std::invalid_argument("stabilization shift must stay below a quarter of the shortest interval");
  if (beta == 0.0) return closure;
  std::vector<ClosurePoint> moved;
  for (const auto& pt : closure.points) {
    ClosurePoint q = pt;
    if (pt.mu > kTieTolerance && pt.mu < 1.0 - kTieTolerance) {
      const auto& iv =
          env.intervals[static_cast<std::size_t>(env.interval_of_strategy(pt.strategy))];
      if (std::abs(pt.mu - iv.lo) <= kTieTolerance) {
        q.mu = pt.mu + beta;
      } else if (std::abs(pt.mu - iv.hi) <= kTieTolerance) {
        q.mu = pt.mu - beta;
      }
    }
    moved.push_back(q);
  }
  ConcaveClosure out;
  out.points = upper_hull(dedupe_by_mu(std::move(moved)));
  (void)game;
  return out;
}

double PosteriorDistribution::implied_prior() const {
  double total = 0.0;
  for (const auto& p : posteriors) total += p.weight * p.mu;
  return total;
}

PosteriorDistribution split_prior(const ConcaveClosure& closure, double mu) {
  mu = std::clamp(mu, 0.0, 1.0);
  PosteriorDistribution post;
  post.prior = mu;
  const auto& pts = closure.points;
  std::size_t hi = 1;
  while (hi + 1 < pts.size() && pts[hi].mu < mu - 1e-12) ++hi;
  const auto& L = pts[hi - 1];
  const auto& R = pts[hi];
  if (std::abs(mu - L.mu) <= 1e-12) {
    post.posteriors.push_back({1.0, L.mu, L.strategy});
  } else if (std::abs(mu - R.mu) <= 1e-12) {
    post.posteriors.push_back({1.0, R.mu, R.strategy});
  } else {
    double w = (mu - L.mu) / (R.mu - L.mu);
    post.posteriors.push_back({1.0 - w, L.mu, L.strategy});
    post.posteriors.push_back({w, R.mu, R.strategy});
  }
  return post;
}

SignalScheme scheme_from_posteriors(const PosteriorDistribution& post, int num_signals) {
  SignalScheme scheme;
  scheme.num_signals = num_signals;
  scheme.probs.assign(static_cast<std::size_t>(2 * num_signals), 0.0);
  double mu = post.prior;
  if (mu <= 1e-12 || mu >= 1.0 - 1e-12) {
    // Degenerate prior: the only Bayes-plausible split is a point mass, so the
    // scheme sends that posterior's signal in both states.
    int s = post.posteriors.front().signal;
    scheme.probs[static_cast<std::size_t>(s)] = 1.0;
    scheme.probs[static_cast<std::size_t>(num_signals + s)] = 1.0;
    return scheme;
  }
  for (const auto& p : post.posteriors) {
    scheme.probs[static_cast<std::size_t>(p.signal)] += p.weight * (1.0 - p.mu) / (1.0 - mu);
    scheme.probs[static_cast<std::size_t>(num_signals + p.signal)] += p.weight * p.mu / mu;
  }
  return scheme;
}

PosteriorDistribution posteriors_from_scheme(const SignalScheme& scheme, double prior) {
  PosteriorDistribution post;
  post.prior = prior;
  for (int s = 0; s < scheme.num_signals; ++s) {
    double weight = (1.0 - prior) * scheme.at(s, 0) + prior * scheme.at(s, 1);
    if (weight <= 1e-12) continue;
    double mu = prior * scheme.at(s, 1) / weight;
    post.posteriors.push_back({weight, mu, s});
  }
  return post;
}

void PersuasionOracleParams::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("stabilization shift must be positive");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("stability knob x must lie in [0,1]");
  if (!(delta > 0.0) || delta > beta * beta / 16.0 + 1e-15)
    throw std::invalid_argument("conditional grid step must be positive and at most beta^2/16");
}

namespace {

SignalScheme single_signal_scheme(int num_signals, int signal) {
  SignalScheme scheme;
  scheme.num_signals = num_signals;
  scheme.probs.assign(static_cast<std::size_t>(2 * num_signals), 0.0);
  scheme.probs[static_cast<std::size_t>(signal)] = 1.0;
  scheme.probs[static_cast<std::size_t>(num_signals + signal)] = 1.0;
  return scheme;
}

// Receiver-optimal strategy at posterior mean mu; ties resolved in the
// principal's favor, then by index.
int strategy_at(const PersuasionGame& game, double mu) {
  int best = 0;
  double best_u = -1e300, best_v = -1e300;
  for (int s = 0; s < game.num_strategies(); ++s) {
    double u = (1.0 - mu) * game.strategy_agent_utility(s, 0) +
               mu * game.strategy_agent_utility(s, 1);
    double v = game.strategy_principal_value(s);
    if (u > best_u + kTieTolerance ||
        (u >= best_u - kTieTolerance && v > best_v + kTieTolerance)) {
      best = s;
      best_u = std::max(best_u, u);
      best_v = v;
    }
  }
  return best;
}

}  // namespace

PersuasionOracleResult persuasion_stable_oracle(const PersuasionGame& game, double prior_mu,
                                                const PersuasionOracleParams& params) {
  params.validate();
  if (prior_mu < -kTieTolerance || prior_mu > 1.0 + kTieTolerance)
    throw std::invalid_argument("prior must lie in [0,1]");
  prior_mu = std::clamp(prior_mu, 0.0, 1.0);
  auto env = build_envelope(game);
  if (params.beta >= env.min_length / 4.0)
    throw std::invalid_argument("stabilization shift must stay below a quarter of the shortest interval");

  PersuasionOracleResult result;
  const int n = game.num_strategies();
  if (prior_mu <= 1e-12 || prior_mu >= 1.0 - 1e-12) {
    int s = strategy_at(game, prior_mu);
    result.scheme = single_signal_scheme(n, s);
    result.raw_scheme = result.scheme;
    result.posteriors.prior = prior_mu;
    result.posteriors.posteriors.push_back({1.0, prior_mu, s});
    return result;
  }

  auto closure = concave_closure(game, env);
  auto stabilized = stabilize_closure(game, env, closure, params.beta);
  result.posteriors = split_prior(stabilized, prior_mu);

  const auto& ps = result.posteriors.posteriors;
  if (ps.size() == 1 || ps[0].signal == ps[1].signal) {
    result.scheme = single_signal_scheme(n, ps[0].signal);
    result.raw_scheme = result.scheme;
    return result;
  }

  result.raw_scheme = scheme_from_posteriors(result.posteriors, n);
  result.informative = true;

  // Round both conditionals of the lower-indexed active signal to the grid;
  // the other active signal absorbs the complement so columns still sum to 1.
  int first = std::min(ps[0].signal, ps[1].signal);
  int other = ps[0].signal + ps[1].signal - first;
  result.scheme = result.raw_scheme;
  auto max_k = static_cast<long long>(std::floor(1.0 / params.delta));
  for (int y = 0; y < 2; ++y) {
    long long k = std::llround(result.raw_scheme.at(first, y) / params.delta);
    k = std::clamp(k, 0ll, max_k);
    double rounded = std::min(1.0, static_cast<double>(k) * params.delta);
    result.scheme.probs[static_cast<std::size_t>(y * n + first)] = rounded;
    result.scheme.probs[static_cast<std::size_t>(y * n + other)] = 1.0 - rounded;
  }
  return result;
}

PersuasionGuarantee persuasion_guarantee(const EnvelopeDecomposition& env,
                                         const PersuasionOracleParams& params, double eps) {
  PersuasionGuarantee g;
  g.eps = eps;
  g.c = 3.0 * params.beta / env.min_length + env.c2 * std::sqrt(eps) + 2.0 * std::sqrt(params.delta);
  g.beta = params.x * env.min_slope_gap * params.beta / 2.0;
  g.gamma = std::max(params.x, std::sqrt(params.delta));
  return g;
}

}  // namespace palab
