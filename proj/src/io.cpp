#include "palab/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <utility>

namespace palab {

namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const json& require(const json& obj, const std::string& prefix, const char* key) {
  if (!obj.is_object()) throw ConfigError(prefix.empty() ? "config" : prefix, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(prefix, key), "missing");
  return *it;
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ConfigError(field, "expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
  return v.get<std::int64_t>();
}

bool as_bool(const json& v, const std::string& field) {
  if (!v.is_boolean()) throw ConfigError(field, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& field) {
  if (!v.is_string()) throw ConfigError(field, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_number_array(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_number(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<int> as_int_array(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of integers");
  std::vector<int> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(
        static_cast<int>(as_integer(v[i], field + "[" + std::to_string(i) + "]")));
  return out;
}

std::vector<std::string> as_string_array(const json& v, const std::string& field) {
  if (!v.is_array()) throw ConfigError(field, "expected an array of strings");
  std::vector<std::string> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_string(v[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

double opt_number(const json& obj, const std::string& prefix, const char* key, double dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_number(*it, join(prefix, key));
}

std::int64_t opt_integer(const json& obj, const std::string& prefix, const char* key,
                         std::int64_t dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_integer(*it, join(prefix, key));
}

bool opt_bool(const json& obj, const std::string& prefix, const char* key, bool dflt) {
  auto it = obj.find(key);
  return it == obj.end() ? dflt : as_bool(*it, join(prefix, key));
}

std::unique_ptr<Game> linear_game_from_json(const json& spec, const std::string& prefix) {
  std::vector<std::string> actions =
      as_string_array(require(spec, prefix, "actions"), join(prefix, "actions"));
  std::vector<double> costs =
      as_number_array(require(spec, prefix, "costs"), join(prefix, "costs"));
  std::vector<double> values =
      as_number_array(require(spec, prefix, "outcome_values"), join(prefix, "outcome_values"));
  const json& of = require(spec, prefix, "outcome_of");
  std::string of_field = join(prefix, "outcome_of");
  if (!of.is_array() || of.size() != actions.size())
    throw ConfigError(of_field, "expected one outcome row per action");
  std::vector<std::vector<int>> outcome_of;
  for (std::size_t a = 0; a < of.size(); ++a) {
    std::string row_field = of_field + "[" + std::to_string(a) + "]";
    std::vector<int> row = as_int_array(of[a], row_field);
    if (!outcome_of.empty() && row.size() != outcome_of[0].size())
      throw ConfigError(row_field, "all actions need the same number of states");
    for (int o : row)
      if (o < 0 || o >= static_cast<int>(values.size()))
        throw ConfigError(row_field, "outcome index " + std::to_string(o) +
                                         " outside outcome_values");
    outcome_of.push_back(std::move(row));
  }
  std::vector<double> benchmarks =
      as_number_array(require(spec, prefix, "benchmarks"), join(prefix, "benchmarks"));
  std::vector<std::string> states;
  if (spec.contains("states"))
    states = as_string_array(spec["states"], join(prefix, "states"));
  try {
    return std::make_unique<LinearContractGame>(std::move(actions), std::move(costs),
                                                std::move(values), std::move(outcome_of),
                                                std::move(benchmarks), std::move(states));
  } catch (const std::exception& e) {
    throw ConfigError(prefix, e.what());
  }
}

std::unique_ptr<Game> tabular_game_from_json(const json& spec, const std::string& prefix) {
  auto table = [&](const char* key) {
    const json& t = require(spec, prefix, key);
    std::string field = join(prefix, key);
    if (!t.is_array()) throw ConfigError(field, "expected a [action][policy][state] array");
    std::vector<std::vector<std::vector<double>>> out;
    for (std::size_t a = 0; a < t.size(); ++a) {
      std::string a_field = field + "[" + std::to_string(a) + "]";
      if (!t[a].is_array()) throw ConfigError(a_field, "expected a [policy][state] array");
      std::vector<std::vector<double>> rows;
      for (std::size_t p = 0; p < t[a].size(); ++p)
        rows.push_back(as_number_array(t[a][p], a_field + "[" + std::to_string(p) + "]"));
      out.push_back(std::move(rows));
    }
    return out;
  };
  auto u = table("u");
  auto v = table("v");
  std::vector<int> benchmarks =
      as_int_array(require(spec, prefix, "benchmarks"), join(prefix, "benchmarks"));
  try {
    return std::make_unique<TabularGame>(std::move(u), std::move(v), std::move(benchmarks));
  } catch (const std::exception& e) {
    throw ConfigError(prefix, e.what());
  }
}

std::unique_ptr<Game> persuasion_game_from_json(const json& spec, const std::string& prefix) {
  std::vector<std::string> strategies =
      as_string_array(require(spec, prefix, "strategies"), join(prefix, "strategies"));
  int n = static_cast<int>(strategies.size());
  const json& ju = require(spec, prefix, "agent_utility");
  std::string u_field = join(prefix, "agent_utility");
  if (!ju.is_array() || static_cast<int>(ju.size()) != n)
    throw ConfigError(u_field, "expected one [state] row per strategy");
  std::vector<std::vector<double>> agent_utility;
  for (std::size_t s = 0; s < ju.size(); ++s) {
    std::string row_field = u_field + "[" + std::to_string(s) + "]";
    std::vector<double> row = as_number_array(ju[s], row_field);
    if (row.size() != 2) throw ConfigError(row_field, "binary-state game needs two entries");
    agent_utility.push_back(std::move(row));
  }
  std::vector<double> principal_value = as_number_array(
      require(spec, prefix, "principal_value"), join(prefix, "principal_value"));
  if (static_cast<int>(principal_value.size()) != n)
    throw ConfigError(join(prefix, "principal_value"), "expected one value per strategy");

  // Benchmarks may invoke the game's own helpers (uninformative schemes, the
  // stable oracle), so build the game first without them.
  PersuasionGame base(strategies, agent_utility, principal_value, {});

  const json& jb = require(spec, prefix, "benchmarks");
  std::string b_field = join(prefix, "benchmarks");
  if (!jb.is_array() || jb.empty()) throw ConfigError(b_field, "expected a non-empty array");
  std::vector<Policy> benchmarks;
  for (std::size_t k = 0; k < jb.size(); ++k) {
    std::string k_field = b_field + "[" + std::to_string(k) + "]";
    const json& entry = jb[k];
    std::string type = as_string(require(entry, k_field, "type"), join(k_field, "type"));
    if (type == "no_info") {
      int signal =
          static_cast<int>(as_integer(require(entry, k_field, "signal"), join(k_field, "signal")));
      if (signal < 0 || signal >= n)
        throw ConfigError(join(k_field, "signal"), "outside the strategy set");
      benchmarks.push_back(base.no_info_scheme(signal));
    } else if (type == "matrix") {
      std::vector<double> probs =
          as_number_array(require(entry, k_field, "probs"), join(k_field, "probs"));
      if (static_cast<int>(probs.size()) != 2 * n)
        throw ConfigError(join(k_field, "probs"),
                          "expected a flattened 2 x " + std::to_string(n) + " matrix");
      for (int y = 0; y < 2; ++y) {
        double total = 0.0;
        for (int s = 0; s < n; ++s) {
          double p = probs[static_cast<std::size_t>(y * n + s)];
          if (p < -1e-12) throw ConfigError(join(k_field, "probs"), "negative entry");
          total += p;
        }
        if (std::fabs(total - 1.0) > 1e-9)
          throw ConfigError(join(k_field, "probs"),
                            "state " + std::to_string(y) + " row must sum to 1");
      }
      benchmarks.push_back(Policy{std::move(probs)});
    } else if (type == "optimal") {
      PersuasionOracleParams params;
      params.beta = as_number(require(entry, k_field, "beta"), join(k_field, "beta"));
      params.x = as_number(require(entry, k_field, "x"), join(k_field, "x"));
      params.delta = as_number(require(entry, k_field, "delta"), join(k_field, "delta"));
      double prior = as_number(require(entry, k_field, "prior"), join(k_field, "prior"));
      if (prior <= 0.0 || prior >= 1.0)
        throw ConfigError(join(k_field, "prior"), "must lie strictly between 0 and 1");
      try {
        params.validate();
        benchmarks.push_back(persuasion_stable_oracle(base, prior, params).scheme.to_policy());
      } catch (const std::exception& e) {
        throw ConfigError(k_field, e.what());
      }
    } else {
      throw ConfigError(join(k_field, "type"), "unknown benchmark type '" + type + "'");
    }
  }
  try {
    return std::make_unique<PersuasionGame>(std::move(strategies), std::move(agent_utility),
                                            std::move(principal_value), std::move(benchmarks));
  } catch (const std::exception& e) {
    throw ConfigError(prefix, e.what());
  }
}

std::unique_ptr<Mechanism> mechanism_from_json(const json& doc, const Game& game) {
  const json& spec = require(doc, "", "mechanism");
  std::string type = as_string(require(spec, "mechanism", "type"), "mechanism.type");
  try {
    if (type == "constant") {
      int k = static_cast<int>(
          as_integer(require(spec, "mechanism", "benchmark"), "mechanism.benchmark"));
      return std::make_unique<ConstantMechanism>(game, k);
    }
    if (type == "constant-pair") {
      int k = static_cast<int>(
          as_integer(require(spec, "mechanism", "benchmark"), "mechanism.benchmark"));
      int r = static_cast<int>(as_integer(require(spec, "mechanism", "recommendation"),
                                          "mechanism.recommendation"));
      return std::make_unique<ConstantPairMechanism>(game, k, r);
    }
    if (type == "benchmark-best") return std::make_unique<BenchmarkBestMechanism>(game);
    if (type == "linear-oracle") {
      const auto* lin = dynamic_cast<const LinearContractGame*>(&game);
      if (!lin) throw ConfigError("mechanism.type", "linear-oracle requires a linear game");
      LinearOracleParams params;
      params.beta = as_number(require(spec, "mechanism", "beta"), "mechanism.beta");
      params.delta = as_number(require(spec, "mechanism", "delta"), "mechanism.delta");
      return std::make_unique<LinearOracleMechanism>(*lin, params);
    }
    if (type == "persuasion-oracle") {
      const auto* per = dynamic_cast<const PersuasionGame*>(&game);
      if (!per)
        throw ConfigError("mechanism.type", "persuasion-oracle requires a persuasion game");
      PersuasionOracleParams params;
      params.beta = as_number(require(spec, "mechanism", "beta"), "mechanism.beta");
      params.x = as_number(require(spec, "mechanism", "x"), "mechanism.x");
      params.delta = as_number(require(spec, "mechanism", "delta"), "mechanism.delta");
      double optimism = opt_number(spec, "mechanism", "optimism", 0.0);
      return std::make_unique<PersuasionOracleMechanism>(*per, params, optimism);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("mechanism", e.what());
  }
  throw ConfigError("mechanism.type", "unknown mechanism '" + type + "'");
}

}  // namespace

std::unique_ptr<Game> game_from_json(const json& spec, const std::string& prefix) {
  std::string type = as_string(require(spec, prefix, "type"), join(prefix, "type"));
  if (type == "linear") return linear_game_from_json(spec, prefix);
  if (type == "tabular") return tabular_game_from_json(spec, prefix);
  if (type == "persuasion") return persuasion_game_from_json(spec, prefix);
  throw ConfigError(join(prefix, "type"), "unknown game type '" + type + "'");
}

ExperimentConfig parse_experiment_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig config;
  config.game = game_from_json(require(doc, "", "game"), "game");
  config.game_kind = config.game->kind();

  config.mechanism = mechanism_from_json(doc, *config.game);
  config.mechanism_kind = config.mechanism->kind();

  ExperimentPlan plan;
  plan.horizon = as_integer(require(doc, "", "horizon"), "horizon");
  if (plan.horizon < 1) throw ConfigError("horizon", "must be at least 1");
  plan.repetitions = static_cast<int>(opt_integer(doc, "", "repetitions", 32));
  if (plan.repetitions < 1) throw ConfigError("repetitions", "must be at least 1");
  std::int64_t seed = opt_integer(doc, "", "seed", 0);
  if (seed < 0) throw ConfigError("seed", "must be nonnegative");
  plan.seed = static_cast<std::uint64_t>(seed);
  plan.threads = static_cast<int>(opt_integer(doc, "", "threads", 0));
  if (plan.threads < 0) throw ConfigError("threads", "must be nonnegative");
  plan.with_replays = opt_bool(doc, "", "replays", true);

  // Forecaster: kind plus grid resolution.
  std::string fkind = "calibrated";
  std::int64_t resolution = 32;
  if (doc.contains("forecaster")) {
    const json& f = doc["forecaster"];
    fkind = as_string(require(f, "forecaster", "type"), "forecaster.type");
    resolution = opt_integer(f, "forecaster", "resolution", 32);
  }
  if (resolution < 1) throw ConfigError("forecaster.resolution", "must be at least 1");
  plan.grid_resolution = static_cast<int>(resolution);
  if (fkind == "calibrated")
    config.forecaster = calibrated_forecaster_factory();
  else if (fkind == "event")
    config.forecaster = event_forecaster_factory();
  else
    throw ConfigError("forecaster.type", "unknown forecaster '" + fkind + "'");
  config.forecaster_kind = fkind;

  // Event families: default matches the mechanism's rule.
  std::string families = config.mechanism_kind == "linear-oracle" ||
                                 config.mechanism_kind == "persuasion-oracle"
                             ? "oracle"
                             : "benchmark";
  if (doc.contains("events")) families = as_string(doc["events"], "events");
  if (families == "oracle")
    plan.families = EventFamilies::kOracle;
  else if (families == "benchmark")
    plan.families = EventFamilies::kBenchmark;
  else
    throw ConfigError("events", "unknown event family set '" + families + "'");

  // Agent.
  const json& agent = require(doc, "", "agent");
  std::string akind = as_string(require(agent, "agent", "type"), "agent.type");
  if (akind == "follower") {
    config.agent = follower_factory();
  } else if (akind == "swap") {
    config.agent = swap_learner_factory(*config.game);
  } else if (akind == "adversary-L") {
    AdversaryConfig ac;
    ac.work_action = static_cast<int>(opt_integer(agent, "agent", "work_action", ac.work_action));
    ac.shirk_action =
        static_cast<int>(opt_integer(agent, "agent", "shirk_action", ac.shirk_action));
    ac.medium_state =
        static_cast<int>(opt_integer(agent, "agent", "medium_state", ac.medium_state));
    ac.trigger_after_medium =
        opt_number(agent, "agent", "trigger_after_medium", ac.trigger_after_medium);
    ac.trigger_after_high =
        opt_number(agent, "agent", "trigger_after_high", ac.trigger_after_high);
    ac.work_prob_on_high = opt_number(agent, "agent", "work_prob_on_high", ac.work_prob_on_high);
    config.agent = adversary_factory(*config.game, ac);
  } else {
    throw ConfigError("agent.type", "unknown agent '" + akind + "'");
  }
  config.agent_kind = akind;

  // State generator.
  const json& states = require(doc, "", "states");
  std::string skind = as_string(require(states, "states", "type"), "states.type");
  int ny = config.game->num_states();
  if (skind == "iid") {
    std::vector<double> probs =
        as_number_array(require(states, "states", "probs"), "states.probs");
    if (static_cast<int>(probs.size()) != ny)
      throw ConfigError("states.probs", "expected one probability per state");
    double total = 0.0;
    for (double p : probs) {
      if (p < 0.0) throw ConfigError("states.probs", "negative probability");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("states.probs", "must sum to 1");
    config.states = iid_state_factory(std::move(probs));
  } else if (skind == "pinned-fair") {
    int first = static_cast<int>(opt_integer(states, "states", "first", 0));
    if (first < 0 || first >= ny) throw ConfigError("states.first", "outside the state set");
    config.states = pinned_fair_state_factory(first, ny);
  } else if (skind == "anti-forecast") {
    config.states = anti_forecast_state_factory();
  } else if (skind == "fixed") {
    std::vector<int> sequence =
        as_int_array(require(states, "states", "sequence"), "states.sequence");
    if (static_cast<std::int64_t>(sequence.size()) < plan.horizon)
      throw ConfigError("states.sequence", "shorter than the horizon");
    for (int y : sequence)
      if (y < 0 || y >= ny) throw ConfigError("states.sequence", "state outside the state set");
    config.states = fixed_state_factory(std::move(sequence));
  } else {
    throw ConfigError("states.type", "unknown state generator '" + skind + "'");
  }
  config.states_kind = skind;

  // Fixed-pair replays.
  if (doc.contains("pair_replays")) {
    const json& pairs = doc["pair_replays"];
    if (!pairs.is_array()) throw ConfigError("pair_replays", "expected an array of [benchmark, recommendation] pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      std::string field = "pair_replays[" + std::to_string(i) + "]";
      std::vector<int> pair = as_int_array(pairs[i], field);
      if (pair.size() != 2) throw ConfigError(field, "expected [benchmark, recommendation]");
      if (pair[0] < 0 || pair[0] >= static_cast<int>(config.game->benchmarks().size()))
        throw ConfigError(field, "benchmark index outside the benchmark set");
      if (pair[1] < 0 || pair[1] >= config.game->num_actions())
        throw ConfigError(field, "recommendation outside the action set");
      plan.pair_replays.emplace_back(pair[0], pair[1]);
    }
  }

  config.plan = plan;
  return config;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(load_json_file(path));
}

ExperimentResult run_config(const ExperimentConfig& config) {
  return run_experiment(*config.game, *config.mechanism, config.plan, config.forecaster,
                        config.agent, config.states);
}

std::string format_number(double x) { return json(x).dump(); }

void write_transcript_csv(std::ostream& out, const ForecastGrid& grid,
                          const std::vector<TranscriptRow>& rows) {
  out << "# palab-csv transcript v1\n";
  out << "t";
  for (int y = 0; y < grid.num_states(); ++y) out << ",pi_" << y;
  out << ",p,r,a,y,U,V\n";
  for (const TranscriptRow& row : rows) {
    out << row.t;
    const Forecast& pi = grid.cell(row.cell);
    for (double p : pi) out << "," << format_number(p);
    out << "," << row.policy_id << "," << row.recommendation << "," << row.action << ","
        << row.state << "," << format_number(row.agent_utility) << ","
        << format_number(row.principal_utility) << "\n";
  }
}

void write_policies_csv(std::ostream& out, const std::vector<Policy>& policies) {
  out << "# palab-csv policies v1\n";
  std::size_t width = 0;
  for (const Policy& p : policies) width = std::max(width, p.params.size());
  out << "id";
  for (std::size_t i = 0; i < width; ++i) out << ",param_" << i;
  out << "\n";
  for (std::size_t id = 0; id < policies.size(); ++id) {
    out << id;
    for (std::size_t i = 0; i < width; ++i) {
      out << ",";
      if (i < policies[id].params.size()) out << format_number(policies[id].params[i]);
    }
    out << "\n";
  }
}

void write_audit_csv(std::ostream& out, const std::vector<BiasRow>& bias, std::int64_t horizon) {
  out << "# palab-csv audit v1\n";
  out << "event_id,n_E,alpha,T\n";
  for (const BiasRow& row : bias)
    out << row.event_id << "," << row.n_e << "," << format_number(row.alpha) << "," << horizon
        << "\n";
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "# palab-csv sweep v1\n";
  out << "T,PR,SwapReg,max_alpha\n";
  for (const SweepRow& row : rows)
    out << row.horizon << "," << format_number(row.policy_regret) << ","
        << format_number(row.swap_rate) << "," << format_number(row.max_alpha) << "\n";
}

namespace {

json regret_block(const RegretSummary& summary) {
  json block;
  json per = json::array();
  for (const BenchmarkRegret& b : summary.per_benchmark) {
    json row;
    row["benchmark"] = b.benchmark;
    if (b.recommendation >= 0) row["recommendation"] = b.recommendation;
    row["mean"] = b.mean;
    row["std_error"] = b.std_error;
    row["per_rep"] = b.per_rep;
    per.push_back(std::move(row));
  }
  block["per_benchmark"] = std::move(per);
  block["policy_regret"] = summary.policy_regret;
  block["argmax_benchmark"] = summary.argmax_benchmark;
  return block;
}

}  // namespace

json report_json(const Game& game, const ExperimentResult& result, const ExperimentPlan& plan) {
  json j;
  j["schema"] = "palab-report-v1";
  j["game"] = game.kind();
  j["horizon"] = plan.horizon;
  j["repetitions"] = plan.repetitions;
  j["seed"] = plan.seed;
  j["grid_resolution"] = plan.grid_resolution;
  j["event_families"] = plan.families == EventFamilies::kOracle ? "oracle" : "benchmark";
  j["mechanism_optimism"] = result.table.optimism;

  // Conditional bias of the shared forecast trace.
  json bias = json::array();
  double max_alpha = 0.0;
  for (const BiasRow& row : result.bias) {
    bias.push_back({{"event", row.event_id}, {"n", row.n_e}, {"alpha", row.alpha}});
    max_alpha = std::max(max_alpha, row.alpha);
  }
  j["bias"] = std::move(bias);
  j["max_alpha"] = max_alpha;

  if (!result.regret.per_benchmark.empty()) j["regret"] = regret_block(result.regret);
  if (!result.pair_regret.per_benchmark.empty())
    j["pair_regret"] = regret_block(result.pair_regret);

  // Realized principal value per round: the quantity the regret notions are
  // measured against, and the direct check that a mechanism extracts value.
  {
    json per_rep_value = json::array();
    double value_sum = 0.0;
    for (const RepetitionResult& rep : result.reps) {
      double rate = rep.realized.principal_total / static_cast<double>(plan.horizon);
      per_rep_value.push_back(rate);
      value_sum += rate;
    }
    j["value"] = {{"mean", value_sum / static_cast<double>(result.reps.size())},
                  {"per_rep", std::move(per_rep_value)}};
  }

  // Assumption rates per repetition on the realized runs, plus the certified
  // levels (the smallest rates at which the assumptions hold on every rep).
  double T = static_cast<double>(plan.horizon);
  json per_rep = json::array();
  double swap_sum = 0.0, neg_sum = 0.0, ugap_sum = 0.0, shortfall_sum = 0.0;
  double eps_swap = 0.0, eps_neg = 0.0;
  std::vector<double> ugap_rates, shortfall_rates;
  struct DevAgg {
    std::int64_t rounds = 0;
    double u_sum = 0.0, v_sum = 0.0;
    int seen = 0;
  };
  std::map<std::pair<int, int>, DevAgg> dev_agg;
  for (const RepetitionResult& rep : result.reps) {
    AssumptionReport a = assumption_diagnostics(game, rep.realized.rows, result.table.policies);
    double swap_rate = a.swap_total / T;
    double neg_rate = a.neg_total / T;
    double ugap_rate = a.ugap_total / T;
    double shortfall_rate = a.v_shortfall_total / T;
    per_rep.push_back({{"swap_rate", swap_rate},
                       {"neg_rate", neg_rate},
                       {"ugap_rate", ugap_rate},
                       {"v_shortfall_rate", shortfall_rate}});
    swap_sum += swap_rate;
    neg_sum += neg_rate;
    ugap_sum += ugap_rate;
    shortfall_sum += shortfall_rate;
    eps_swap = std::max(eps_swap, swap_rate);
    eps_neg = std::max(eps_neg, -neg_rate);
    ugap_rates.push_back(ugap_rate);
    shortfall_rates.push_back(shortfall_rate);
    for (const ContextDeviation& d : a.deviations) {
      DevAgg& agg = dev_agg[{d.policy_id, d.recommendation}];
      agg.rounds += d.rounds;
      agg.u_sum += d.u_deviation;
      agg.v_sum += d.v_deviation;
      ++agg.seen;
    }
  }
  double reps = static_cast<double>(result.reps.size());
  json deviations = json::array();
  for (const auto& [key, agg] : dev_agg)
    deviations.push_back({{"policy_id", key.first},
                          {"recommendation", key.second},
                          {"rounds_total", agg.rounds},
                          {"u_deviation_mean", agg.u_sum / agg.seen},
                          {"v_deviation_mean", agg.v_sum / agg.seen}});
  j["assumptions"] = {{"swap_rate_mean", swap_sum / reps},
                      {"neg_rate_mean", neg_sum / reps},
                      {"ugap_rate_mean", ugap_sum / reps},
                      {"v_shortfall_rate_mean", shortfall_sum / reps},
                      {"epsilon_swap", std::max(0.0, eps_swap)},
                      {"epsilon_neg", std::max(0.0, eps_neg)},
                      {"per_rep", std::move(per_rep)},
                      {"deviations", std::move(deviations)}};

  // Alignment relation: realized V-shortfall rate against the UGap rate,
  // fitted across repetitions.  Reported, never asserted.
  AffineFit fit = fit_affine(ugap_rates, shortfall_rates);
  j["alignment_fit"] = {{"m1", fit.slope}, {"m2", fit.intercept}, {"points", fit.points}};

  // Three-term split of each benchmark replay, averaged over repetitions,
  // with the worst telescoping error across all (rep, replay) pairs.
  double identity_gap_max = 0.0;
  auto decomposition_rows = [&](bool pairs) {
    json rows = json::array();
    std::size_t count = pairs ? (result.reps.empty() ? 0 : result.reps[0].pair_replays.size())
                              : (result.reps.empty() ? 0 : result.reps[0].replays.size());
    for (std::size_t k = 0; k < count; ++k) {
      double a_sum = 0.0, b_sum = 0.0, c_sum = 0.0;
      int benchmark = 0, recommendation = -1;
      for (const RepetitionResult& rep : result.reps) {
        const ReplayRun& replay = pairs ? rep.pair_replays[k] : rep.replays[k];
        benchmark = replay.benchmark;
        recommendation = replay.recommendation;
        Decomposition d = regret_decomposition(game, rep.realized, replay, result.table.policies);
        a_sum += d.term_a / T;
        b_sum += d.term_b / T;
        c_sum += d.term_c / T;
        double direct = replay.principal_total - rep.realized.principal_total;
        identity_gap_max =
            std::max(identity_gap_max, std::fabs(d.term_a + d.term_b + d.term_c - direct));
      }
      json row;
      row["benchmark"] = benchmark;
      if (recommendation >= 0) row["recommendation"] = recommendation;
      row["term_a_rate_mean"] = a_sum / reps;
      row["term_b_rate_mean"] = b_sum / reps;
      row["term_c_rate_mean"] = c_sum / reps;
      rows.push_back(std::move(row));
    }
    return rows;
  };
  json decomposition = decomposition_rows(false);
  for (json& row : decomposition_rows(true)) decomposition.push_back(std::move(row));
  if (!decomposition.empty()) {
    j["decomposition"] = std::move(decomposition);
    j["decomposition_identity_gap_max"] = identity_gap_max;
  }

  // Two-action disagreement check; skipped (with the reason) when the game
  // has more actions or some offered contract ties them.
  if (game.num_actions() == 2) {
    try {
      std::int64_t count_max = 0;
      double count_sum = 0.0, bound_min = 0.0, gap = 0.0;
      int violations = 0;
      bool first = true;
      for (const RepetitionResult& rep : result.reps) {
        DisagreementReport d =
            disagreement_diagnostic(game, rep.realized.rows, result.table.policies);
        count_max = std::max(count_max, d.count);
        count_sum += static_cast<double>(d.count);
        bound_min = first ? d.bound : std::min(bound_min, d.bound);
        gap = d.gap;
        if (d.violated) ++violations;
        first = false;
      }
      j["disagreement"] = {{"count_mean", count_sum / reps},
                           {"count_max", count_max},
                           {"bound_min", bound_min},
                           {"gap", gap},
                           {"violations", violations}};
    } catch (const std::exception& e) {
      j["disagreement"] = {{"skipped", e.what()}};
    }
  }

  // Policy registry snapshot (schemes appear as their flattened matrices).
  json policies = json::array();
  for (std::size_t id = 0; id < result.table.policies.size(); ++id)
    policies.push_back({{"id", id}, {"params", result.table.policies[id].params}});
  j["policies"] = std::move(policies);
  return j;
}

}  // namespace palab
