#include "palab/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "json.hpp"
#include "palab/agents.hpp"
#include "palab/game.hpp"
#include "palab/harness.hpp"
#include "palab/io.hpp"
#include "palab/lemmas.hpp"
#include "palab/oracle.hpp"

namespace palab {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

json load_required_config(const CommandOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("config", "--config is required");
  json doc = load_json_file(opt.config_path);
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
  if (opt.seed >= 0) doc["seed"] = opt.seed;
  if (opt.repetitions > 0) doc["repetitions"] = opt.repetitions;
  return doc;
}

json load_optional_config(const CommandOptions& opt) {
  if (opt.config_path.empty()) return json::object();
  json doc = load_json_file(opt.config_path);
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
  return doc;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::filesystem::path prepare_out_dir(const CommandOptions& opt) {
  std::filesystem::path dir = opt.out_dir.empty() ? "." : opt.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

// One exception-to-exit-code policy for every subcommand.
template <class Body>
int guarded(std::ostream& log, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

double max_bias_alpha(const ExperimentResult& result) {
  double max_alpha = 0.0;
  for (const BiasRow& row : result.bias) max_alpha = std::max(max_alpha, row.alpha);
  return max_alpha;
}

// Mean per-round swap and negative-regret rates over the realized runs.
std::pair<double, double> mean_assumption_rates(const Game& game, const ExperimentResult& result,
                                                std::int64_t horizon) {
  double swap_sum = 0.0, neg_sum = 0.0;
  for (const RepetitionResult& rep : result.reps) {
    AssumptionReport a = assumption_diagnostics(game, rep.realized.rows, result.table.policies);
    swap_sum += a.swap_total / static_cast<double>(horizon);
    neg_sum += a.neg_total / static_cast<double>(horizon);
  }
  double n = static_cast<double>(result.reps.size());
  return {swap_sum / n, neg_sum / n};
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

json resolve_schedule(const json& mechanism, std::int64_t horizon);

// Swap any schedule in the mechanism block for concrete numbers once the
// horizon is known, so every subcommand accepts the same config dialect.
void resolve_mechanism_schedule(json& doc) {
  if (doc.contains("mechanism") && doc.contains("horizon") &&
      doc["horizon"].is_number_integer() && doc["horizon"].get<std::int64_t>() >= 1)
    doc["mechanism"] = resolve_schedule(doc["mechanism"], doc["horizon"].get<std::int64_t>());
}

int run_impl(const CommandOptions& opt, std::ostream& log) {
  json doc = load_required_config(opt);
  resolve_mechanism_schedule(doc);
  ExperimentConfig cfg = parse_experiment_config(doc);
  ExperimentResult result = run_config(cfg);
  std::filesystem::path dir = prepare_out_dir(opt);

  std::ostringstream transcript;
  write_transcript_csv(transcript, result.grid, result.reps.front().realized.rows);
  write_file(dir / "transcript.csv", transcript.str());

  std::ostringstream policies;
  write_policies_csv(policies, result.table.policies);
  write_file(dir / "policies.csv", policies.str());

  std::ostringstream audit;
  write_audit_csv(audit, result.bias, cfg.plan.horizon);
  write_file(dir / "audit.csv", audit.str());

  json report = report_json(*cfg.game, result, cfg.plan);
  write_file(dir / "report.json", report.dump(2) + "\n");

  if (!opt.quiet) {
    log << "[run] game=" << cfg.game_kind << " mechanism=" << cfg.mechanism_kind
        << " T=" << cfg.plan.horizon << " reps=" << cfg.plan.repetitions << "\n";
    log << "[run] value/round=" << format_number(report["value"]["mean"].get<double>())
        << " max_alpha=" << format_number(max_bias_alpha(result));
    if (report.contains("regret"))
      log << " policy_regret="
          << format_number(report["regret"]["policy_regret"].get<double>());
    log << "\n[run] wrote " << (dir / "report.json").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

// Horizon-dependent oracle parameters.  A mechanism block may carry
// "schedule": "contract-decay" (contract oracle: beta = coef * T^pow with
// pow = -1/4 by default, grid step 1/ceil(1/sqrt(beta))) or
// "schedule": "signal-decay" (signal oracle: beta = x = coef * T^pow with
// coef 0.1 and pow = -1/10 by default, delta = beta^2/16, and event optimism
// T^eps_pow with eps_pow = -1/5).  The schedule is replaced by concrete
// numbers before the per-horizon config is parsed.
json resolve_schedule(const json& mechanism, std::int64_t horizon) {
  if (!mechanism.is_object() || !mechanism.contains("schedule")) return mechanism;
  if (!mechanism["schedule"].is_string())
    throw ConfigError("mechanism.schedule", "expected a string");
  std::string schedule = mechanism["schedule"].get<std::string>();
  std::string type = mechanism.value("type", std::string());
  json out = mechanism;
  out.erase("schedule");
  double T = static_cast<double>(horizon);
  if (schedule == "contract-decay") {
    if (type != "linear-oracle")
      throw ConfigError("mechanism.schedule", "contract-decay requires type linear-oracle");
    double pow_ = out.value("beta_pow", -0.25);
    double coef = out.value("beta_coef", 1.0);
    out.erase("beta_pow");
    out.erase("beta_coef");
    double beta = coef * std::pow(T, pow_);
    out["beta"] = beta;
    out["delta"] = 1.0 / std::ceil(1.0 / std::sqrt(beta));
  } else if (schedule == "signal-decay") {
    if (type != "persuasion-oracle")
      throw ConfigError("mechanism.schedule", "signal-decay requires type persuasion-oracle");
    double pow_ = out.value("beta_pow", -0.1);
    double coef = out.value("beta_coef", 0.1);
    double eps_pow = out.value("eps_pow", -0.2);
    out.erase("beta_pow");
    out.erase("beta_coef");
    out.erase("eps_pow");
    double beta = coef * std::pow(T, pow_);
    out["beta"] = beta;
    out["x"] = beta;
    out["delta"] = beta * beta / 16.0;
    out["optimism"] = std::pow(T, eps_pow);
  } else {
    throw ConfigError("mechanism.schedule", "unknown schedule '" + schedule + "'");
  }
  return out;
}

int sweep_impl(const CommandOptions& opt, std::ostream& log) {
  json doc = load_required_config(opt);
  if (!doc.contains("horizons") || !doc["horizons"].is_array() || doc["horizons"].empty())
    throw ConfigError("horizons", "expected a non-empty array of horizons");
  std::vector<std::int64_t> horizons;
  for (std::size_t i = 0; i < doc["horizons"].size(); ++i) {
    const json& h = doc["horizons"][i];
    if (!h.is_number_integer() || h.get<std::int64_t>() < 1)
      throw ConfigError("horizons[" + std::to_string(i) + "]", "expected an integer >= 1");
    horizons.push_back(h.get<std::int64_t>());
  }
  if (!doc.contains("mechanism")) throw ConfigError("mechanism", "missing");
  json mechanism = doc["mechanism"];

  std::vector<SweepRow> rows;
  json json_rows = json::array();
  std::vector<double> pr_values, pr_errors, alpha_values;
  for (std::int64_t T : horizons) {
    json run_doc = doc;
    run_doc.erase("horizons");
    run_doc["horizon"] = T;
    run_doc["mechanism"] = resolve_schedule(mechanism, T);
    ExperimentConfig cfg = parse_experiment_config(run_doc);
    ExperimentResult result = run_config(cfg);

    const RegretSummary* summary = nullptr;
    if (!result.regret.per_benchmark.empty())
      summary = &result.regret;
    else if (!result.pair_regret.per_benchmark.empty())
      summary = &result.pair_regret;
    else
      throw ConfigError("replays", "sweep needs benchmark replays or pair_replays enabled");
    double pr = summary->policy_regret;
    double pr_se =
        summary->per_benchmark[static_cast<std::size_t>(summary->argmax_benchmark)].std_error;
    auto [swap_rate, neg_rate] = mean_assumption_rates(*cfg.game, result, T);
    double max_alpha = max_bias_alpha(result);

    rows.push_back({T, pr, swap_rate, max_alpha});
    pr_values.push_back(pr);
    pr_errors.push_back(pr_se);
    alpha_values.push_back(max_alpha);
    json_rows.push_back({{"T", T},
                         {"PR", pr},
                         {"PR_se", pr_se},
                         {"swap_rate", swap_rate},
                         {"neg_rate", neg_rate},
                         {"max_alpha", max_alpha}});
    if (!opt.quiet)
      log << "[sweep] T=" << T << " PR=" << format_number(pr)
          << " swap/T=" << format_number(swap_rate)
          << " max_alpha=" << format_number(max_alpha) << "\n";
  }

  // Log-log decay fits; regret can dip nonpositive, so it is floored before
  // taking logs (the floor only ever flattens a fitted decay).
  json report;
  report["schema"] = "palab-sweep-v1";
  report["horizons"] = horizons;
  report["rows"] = std::move(json_rows);
  bool nonincreasing = true;
  for (std::size_t i = 0; i + 1 < pr_values.size(); ++i)
    nonincreasing = nonincreasing &&
                    pr_values[i + 1] <= pr_values[i] + 2.0 * (pr_errors[i] + pr_errors[i + 1]);
  report["pr_nonincreasing_2se"] = nonincreasing;
  if (horizons.size() >= 2) {
    std::vector<double> log_t, log_pr, log_alpha;
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      log_t.push_back(std::log(static_cast<double>(horizons[i])));
      log_pr.push_back(std::log(std::max(pr_values[i], 1e-6)));
      log_alpha.push_back(std::log(std::max(alpha_values[i], 1e-6)));
    }
    report["pr_slope"] = fit_affine(log_t, log_pr).slope;
    report["alpha_slope"] = fit_affine(log_t, log_alpha).slope;
  } else {
    report["pr_slope"] = nullptr;
    report["alpha_slope"] = nullptr;
  }

  std::filesystem::path dir = prepare_out_dir(opt);
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  write_file(dir / "sweep.csv", csv.str());
  write_file(dir / "sweep.json", report.dump(2) + "\n");
  if (!opt.quiet) {
    if (report["pr_slope"].is_number())
      log << "[sweep] pr_slope=" << format_number(report["pr_slope"].get<double>())
          << " alpha_slope=" << format_number(report["alpha_slope"].get<double>()) << "\n";
    log << "[sweep] wrote " << (dir / "sweep.csv").string() << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// audit-bias
// ---------------------------------------------------------------------------

int audit_bias_impl(const CommandOptions& opt, std::ostream& log) {
  json doc = load_required_config(opt);
  resolve_mechanism_schedule(doc);
  ExperimentConfig cfg = parse_experiment_config(doc);
  // Bias is a property of the shared forecast/state trace, so one repetition
  // without replays measures it exactly.
  cfg.plan.repetitions = 1;
  cfg.plan.with_replays = false;
  cfg.plan.pair_replays.clear();
  ExperimentResult result = run_config(cfg);

  std::filesystem::path dir = prepare_out_dir(opt);
  std::ostringstream csv;
  write_audit_csv(csv, result.bias, cfg.plan.horizon);
  write_file(dir / "audit.csv", csv.str());

  json report;
  report["schema"] = "palab-audit-v1";
  report["game"] = cfg.game_kind;
  report["forecaster"] = cfg.forecaster_kind;
  report["horizon"] = cfg.plan.horizon;
  report["event_families"] =
      cfg.plan.families == EventFamilies::kOracle ? "oracle" : "benchmark";
  report["events"] = result.bias.size();
  report["max_alpha"] = max_bias_alpha(result);
  json bias_rows = json::array();
  for (const BiasRow& row : result.bias)
    bias_rows.push_back({{"event", row.event_id}, {"n", row.n_e}, {"alpha", row.alpha}});
  report["rows"] = std::move(bias_rows);
  write_file(dir / "audit.json", report.dump(2) + "\n");

  if (!opt.quiet)
    log << "[audit-bias] events=" << result.bias.size()
        << " max_alpha=" << format_number(report["max_alpha"].get<double>()) << " wrote "
        << (dir / "audit.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify-lemmas
// ---------------------------------------------------------------------------

int verify_lemmas_impl(const CommandOptions& opt, std::ostream& log) {
  json doc = load_optional_config(opt);
  std::uint64_t seed = 0;
  long long cases = 1000;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0)
      throw ConfigError("seed", "expected an integer >= 0");
    seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("cases")) {
    if (!doc["cases"].is_number_integer() || doc["cases"].get<std::int64_t>() < 1)
      throw ConfigError("cases", "expected an integer >= 1");
    cases = doc["cases"].get<long long>();
  }
  if (opt.seed >= 0) seed = static_cast<std::uint64_t>(opt.seed);
  if (opt.repetitions > 0) cases = opt.repetitions;

  LemmaMutation mutation =
      opt.inject_mutant ? LemmaMutation::kFlipStability : LemmaMutation::kNone;
  std::vector<LemmaResult> suites = run_lemma_suites(cases, seed, mutation);

  bool all_passed = true;
  json suite_rows = json::array();
  for (const LemmaResult& suite : suites) {
    bool ok = suite.failures == 0 && suite.cases >= cases;
    all_passed = all_passed && ok;
    suite_rows.push_back(
        {{"name", suite.name}, {"cases", suite.cases}, {"failures", suite.failures}});
    if (!opt.quiet)
      log << "[verify-lemmas] " << suite.name << ": " << suite.cases << " cases, "
          << suite.failures << " failures " << (ok ? "PASS" : "FAIL") << "\n";
  }

  json report;
  report["schema"] = "palab-lemmas-v1";
  report["seed"] = seed;
  report["cases_requested"] = cases;
  report["mutation"] = opt.inject_mutant ? "flip-stability" : "none";
  report["suites"] = std::move(suite_rows);
  report["all_passed"] = all_passed;
  std::filesystem::path dir = prepare_out_dir(opt);
  write_file(dir / "lemmas.json", report.dump(2) + "\n");
  if (!opt.quiet)
    log << "[verify-lemmas] " << (all_passed ? "all suites passed" : "FAILURES detected")
        << ", wrote " << (dir / "lemmas.json").string() << "\n";
  return all_passed ? kExitOk : kExitFailed;
}

// ---------------------------------------------------------------------------
// lower-bound
// ---------------------------------------------------------------------------

// The two-state work/shirk contract game the scripted adversary is built for:
// working costs 1 and produces value 2 only in the first ("medium") state;
// shirking is free and produces nothing.  Benchmarks are the two contracts
// the adversary may cooperate with.
json default_lower_bound_game() {
  return json{{"type", "linear"},
              {"actions", {"work", "shirk"}},
              {"costs", {1.0, 0.0}},
              {"outcome_values", {0.0, 2.0}},
              {"outcome_of", {{1, 0}, {0, 0}}},
              {"benchmarks", {0.5, 0.6}},
              {"states", {"M", "H"}}};
}

struct LowerBoundRun {
  std::vector<double> pair_diffs;  // per configured pair, (replay - realized)/T
  double swap_rate = 0.0;
  double neg_rate = 0.0;
  bool balanced_all = true;
  std::int64_t defect_round = 0;  // 0 when cooperation never broke
};

// Mirrors the scripted agent's cooperation rule from the transcript alone:
// the trigger contract is fixed by the first scripted state, and cooperation
// survives round t iff the offered policy is the trigger, the recommendation
// is the work action, and the state counts through t stay balanced.
LowerBoundRun lower_bound_metrics(const Game& game, const ExperimentResult& result,
                                  std::int64_t horizon, const json& agent_cfg) {
  LowerBoundRun out;
  const RepetitionResult& rep = result.reps.front();
  for (const ReplayRun& replay : rep.pair_replays)
    out.pair_diffs.push_back((replay.principal_total - rep.realized.principal_total) /
                             static_cast<double>(horizon));
  AssumptionReport a = assumption_diagnostics(game, rep.realized.rows, result.table.policies);
  out.swap_rate = a.swap_total / static_cast<double>(horizon);
  out.neg_rate = a.neg_total / static_cast<double>(horizon);

  int work = agent_cfg.value("work_action", 0);
  int medium = agent_cfg.value("medium_state", 0);
  double trigger = result.trace.states.front() == medium
                       ? agent_cfg.value("trigger_after_medium", 0.5)
                       : agent_cfg.value("trigger_after_high", 0.6);
  if (horizon < 2) return out;
  double theta = balanced_threshold(horizon);
  std::int64_t imbalance = 0;
  std::vector<std::int64_t> imbalance_at(static_cast<std::size_t>(horizon) + 1, 0);
  for (std::int64_t t = 1; t <= horizon; ++t) {
    imbalance += result.trace.states[static_cast<std::size_t>(t - 1)] == medium ? 1 : -1;
    imbalance_at[static_cast<std::size_t>(t)] = std::llabs(imbalance);
    if (std::llabs(imbalance) > theta) out.balanced_all = false;
  }
  for (std::int64_t t = 2; t <= horizon; ++t) {
    const TranscriptRow& row = rep.realized.rows[static_cast<std::size_t>(t - 1)];
    const Policy& policy = result.table.policies[static_cast<std::size_t>(row.policy_id)];
    bool cooperative = policy.params.size() == 1 &&
                       std::fabs(policy.params[0] - trigger) <= kTieTolerance &&
                       row.recommendation == work &&
                       imbalance_at[static_cast<std::size_t>(t)] <= theta;
    if (!cooperative) {
      out.defect_round = t;
      break;
    }
  }
  return out;
}

int lower_bound_impl(const CommandOptions& opt, std::ostream& log) {
  json doc = load_required_config(opt);
  if (!doc.contains("mechanism")) throw ConfigError("mechanism", "missing");
  resolve_mechanism_schedule(doc);
  if (!doc.contains("game")) doc["game"] = default_lower_bound_game();
  if (doc.contains("states"))
    throw ConfigError("states", "lower-bound pins both first-state distributions itself");
  if (doc.contains("agent")) {
    if (doc["agent"].value("type", std::string()) != "adversary-L")
      throw ConfigError("agent.type", "lower-bound drives the scripted adversary");
  } else {
    doc["agent"] = {{"type", "adversary-L"}};
  }
  json agent_cfg = doc["agent"];
  int work = agent_cfg.value("work_action", 0);
  if (!doc.contains("pair_replays")) doc["pair_replays"] = {{0, work}, {1, work}};
  doc["replays"] = false;

  std::int64_t runs = 32;
  if (doc.contains("repetitions")) {
    if (!doc["repetitions"].is_number_integer() || doc["repetitions"].get<std::int64_t>() < 1)
      throw ConfigError("repetitions", "expected an integer >= 1");
    runs = doc["repetitions"].get<std::int64_t>();
  }
  std::int64_t base_seed = 0;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0)
      throw ConfigError("seed", "expected an integer >= 0");
    base_seed = doc["seed"].get<std::int64_t>();
  }
  int threads = 0;
  if (doc.contains("threads")) {
    if (!doc["threads"].is_number_integer() || doc["threads"].get<int>() < 0)
      throw ConfigError("threads", "expected an integer >= 0");
    threads = doc["threads"].get<int>();
  }

  // Validate the per-run document once up front so a bad config fails before
  // any work starts (and from the calling thread).
  {
    json probe = doc;
    probe["states"] = {{"type", "pinned-fair"}, {"first", 0}};
    probe["repetitions"] = 1;
    probe["threads"] = 1;
    parse_experiment_config(probe);
  }

  // Each run is an independent experiment with its own seed, so the scripted
  // state randomness genuinely varies across runs; the two distributions
  // share seeds and differ only in the pinned first state.
  std::vector<std::vector<LowerBoundRun>> metrics(2, std::vector<LowerBoundRun>(
                                                         static_cast<std::size_t>(runs)));
  std::vector<std::pair<int, std::int64_t>> tasks;
  for (int d = 0; d < 2; ++d)
    for (std::int64_t i = 0; i < runs; ++i) tasks.emplace_back(d, i);
  std::atomic<std::size_t> next_task{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      std::size_t k = next_task.fetch_add(1);
      if (k >= tasks.size()) return;
      auto [d, i] = tasks[k];
      try {
        json run_doc = doc;
        run_doc["states"] = {{"type", "pinned-fair"}, {"first", d}};
        run_doc["repetitions"] = 1;
        run_doc["threads"] = 1;
        run_doc["seed"] = base_seed + i;
        ExperimentConfig cfg = parse_experiment_config(run_doc);
        ExperimentResult result = run_config(cfg);
        metrics[static_cast<std::size_t>(d)][static_cast<std::size_t>(i)] =
            lower_bound_metrics(*cfg.game, result, cfg.plan.horizon, agent_cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  int n_threads = threads > 0 ? threads
                              : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<int>(n_threads, static_cast<int>(tasks.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::size_t n_pairs = doc["pair_replays"].size();
  json distributions = json::array();
  std::ostringstream csv;
  csv << "# palab-csv lower-bound v1\nfirst_state,run";
  for (std::size_t p = 0; p < n_pairs; ++p) csv << ",pair" << p;
  csv << ",swap_rate,neg_rate,balanced_all,defect_round\n";
  double max_pr = -1e300;
  for (int d = 0; d < 2; ++d) {
    const auto& dist_runs = metrics[static_cast<std::size_t>(d)];
    std::vector<double> pair_means(n_pairs, 0.0);
    double swap_mean = 0.0, neg_mean = 0.0;
    std::int64_t balanced_count = 0, defect_min = 0, defect_max = 0;
    for (std::int64_t i = 0; i < runs; ++i) {
      const LowerBoundRun& run = dist_runs[static_cast<std::size_t>(i)];
      csv << d << "," << i;
      for (std::size_t p = 0; p < n_pairs; ++p) {
        pair_means[p] += run.pair_diffs[p];
        csv << "," << format_number(run.pair_diffs[p]);
      }
      csv << "," << format_number(run.swap_rate) << "," << format_number(run.neg_rate) << ","
          << (run.balanced_all ? 1 : 0) << "," << run.defect_round << "\n";
      swap_mean += run.swap_rate;
      neg_mean += run.neg_rate;
      if (run.balanced_all) ++balanced_count;
      if (i == 0 || run.defect_round < defect_min) defect_min = run.defect_round;
      if (i == 0 || run.defect_round > defect_max) defect_max = run.defect_round;
    }
    double n = static_cast<double>(runs);
    for (double& m : pair_means) m /= n;
    swap_mean /= n;
    neg_mean /= n;
    // Policy regret: best of the constant (policy, recommendation) pairs in
    // expectation, i.e. the max over pairs of the mean difference.
    std::size_t best_pair = 0;
    for (std::size_t p = 1; p < n_pairs; ++p)
      if (pair_means[p] > pair_means[best_pair]) best_pair = p;
    double pr_mean = pair_means[best_pair];
    double pr_var = 0.0;
    for (std::int64_t i = 0; i < runs; ++i) {
      double diff = dist_runs[static_cast<std::size_t>(i)].pair_diffs[best_pair] - pr_mean;
      pr_var += diff * diff;
    }
    double pr_se = runs > 1 ? std::sqrt(pr_var / (n - 1.0) / n) : 0.0;
    max_pr = std::max(max_pr, pr_mean);

    json pairs = json::array();
    for (std::size_t p = 0; p < n_pairs; ++p)
      pairs.push_back({{"benchmark", doc["pair_replays"][p][0].get<int>()},
                       {"recommendation", doc["pair_replays"][p][1].get<int>()},
                       {"mean", pair_means[p]}});
    // Phase note: the adversary cooperates (trigger phase) until its first
    // defection round, after which it runs the no-regret learner for good.
    std::string phase;
    if (defect_max == 0) {
      phase = "trigger";
    } else if (defect_min == defect_max) {
      phase = "noreg from round " + std::to_string(defect_min);
    } else {
      phase = "mixed";
    }
    distributions.push_back({{"first_state", d},
                             {"pr_mean", pr_mean},
                             {"pr_se", pr_se},
                             {"best_pair", best_pair},
                             {"pairs", std::move(pairs)},
                             {"swap_rate_mean", swap_mean},
                             {"neg_rate_mean", neg_mean},
                             {"balanced_all_fraction", static_cast<double>(balanced_count) / n},
                             {"defect_round_min", defect_min},
                             {"defect_round_max", defect_max},
                             {"phase", phase}});
    if (!opt.quiet)
      log << "[lower-bound] first_state=" << d << " PR=" << format_number(pr_mean)
          << " swap/T=" << format_number(swap_mean) << " neg/T=" << format_number(neg_mean)
          << " balanced=" << format_number(static_cast<double>(balanced_count) / n) << "\n";
  }

  json report;
  report["schema"] = "palab-lower-bound-v1";
  report["game"] = doc["game"].value("type", std::string());
  report["horizon"] = doc["horizon"];
  report["runs"] = runs;
  report["seed"] = base_seed;
  report["distributions"] = std::move(distributions);
  report["max_pr"] = max_pr;
  std::filesystem::path dir = prepare_out_dir(opt);
  write_file(dir / "lower_bound.csv", csv.str());
  write_file(dir / "lower_bound.json", report.dump(2) + "\n");
  if (!opt.quiet)
    log << "[lower-bound] max PR=" << format_number(max_pr) << ", wrote "
        << (dir / "lower_bound.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// impossibility
// ---------------------------------------------------------------------------

// The two-contract counterexample: the low contract equally incentivizes both
// actions (so stability needs gamma >= 3/4), while the high contract halves
// the principal's take (so optimality needs c >= 1/2).
LinearContractGame impossibility_game(std::vector<double> benchmarks) {
  return LinearContractGame({"a1", "a2"}, {0.25, 0.5}, {1.0, 2.0}, {{0}, {1}},
                            std::move(benchmarks));
}

// Smallest c making the policy optimal at optimism eps (0 when it already is).
double min_c_for_optimal(const Game& game, const Policy& policy, const Forecast& pi,
                         double eps) {
  int a_star = optimistic_best_response(game, policy, pi, 0.0);
  double v_star = expected_utilities(game, a_star, policy, pi).second;
  double need = 0.0;
  for (const Policy& p0 : game.benchmarks()) {
    int a0 = optimistic_best_response(game, p0, pi, eps);
    double v0 = expected_utilities(game, a0, p0, pi).second;
    need = std::max(need, v0 - v_star);
  }
  return need;
}

// Smallest gamma making the policy (beta, gamma)-stable: the worst principal
// gap among actions whose agent gap falls below beta.
double min_gamma_for_stable(const Game& game, const Policy& policy, const Forecast& pi,
                            double beta) {
  StabilityCertificate cert = is_stable(game, policy, pi, beta, 1e300);
  double need = 0.0;
  for (const ActionVerdict& verdict : cert.verdicts)
    if (verdict.u_gap < beta - kTieTolerance) need = std::max(need, verdict.v_gap);
  return need;
}

int impossibility_impl(const CommandOptions& opt, std::ostream& log) {
  json doc = load_optional_config(opt);
  double gamma_relaxed = 0.8;
  if (doc.contains("gamma_relaxed")) {
    if (!doc["gamma_relaxed"].is_number())
      throw ConfigError("gamma_relaxed", "expected a number");
    gamma_relaxed = doc["gamma_relaxed"].get<double>();
  }

  LinearContractGame game = impossibility_game({0.25, 0.5});
  Forecast pi{1.0};
  const std::vector<double> contracts{0.25, 0.5};
  const std::vector<double> eps_grid{1.0, 1e-2, 1e-6};

  long long checked = 0, hits = 0;
  std::vector<long long> blocked_by_stability(contracts.size(), 0);
  std::vector<long long> blocked_by_optimality(contracts.size(), 0);
  for (int c_num = 0; c_num <= 25; ++c_num) {
    for (int g_num = 0; g_num <= 50; ++g_num) {
      for (int b_exp = 0; b_exp <= 6; ++b_exp) {
        for (double eps : eps_grid) {
          double c = c_num / 100.0;
          double gamma = g_num / 100.0;
          double beta = std::pow(10.0, -b_exp);
          for (std::size_t k = 0; k < contracts.size(); ++k) {
            Policy policy{{contracts[k]}};
            ++checked;
            if (!is_stable(game, policy, pi, beta, gamma).stable) {
              ++blocked_by_stability[k];
            } else if (!is_optimal_stable(game, policy, pi, c, eps, beta, gamma)) {
              ++blocked_by_optimality[k];
            } else {
              ++hits;
            }
          }
        }
      }
    }
  }
  bool certified = hits == 0;

  json policies = json::array();
  for (std::size_t k = 0; k < contracts.size(); ++k) {
    Policy policy{{contracts[k]}};
    policies.push_back({{"contract", contracts[k]},
                        {"blocked_by_stability", blocked_by_stability[k]},
                        {"blocked_by_optimality", blocked_by_optimality[k]},
                        {"min_gamma_for_stable", min_gamma_for_stable(game, policy, pi, 1e-6)},
                        {"min_c_for_optimal", min_c_for_optimal(game, policy, pi, 0.0)}});
  }

  // What survives when the gamma cap is lifted past the tie's principal gap:
  // the low contract becomes optimal stable outright, while the high contract
  // stays blocked by optimality until c reaches 1/2.
  json relaxed = json::array();
  for (double contract : contracts) {
    Policy policy{{contract}};
    bool stable = is_stable(game, policy, pi, 1e-6, gamma_relaxed).stable;
    double need_c = min_c_for_optimal(game, policy, pi, 0.0);
    std::string binding = !stable ? "stability" : (need_c > 0.25 ? "optimality" : "none");
    relaxed.push_back({{"contract", contract},
                       {"stable", stable},
                       {"min_c_for_optimal", need_c},
                       {"optimal_stable_on_grid", stable && need_c <= 0.25},
                       {"binding_constraint", binding}});
  }

  // Documented edge: with a single benchmark the optimality clause compares
  // the policy only against itself, so it is vacuously optimal stable.
  LinearContractGame single = impossibility_game({0.5});
  bool vacuous =
      is_optimal_stable(single, Policy{{0.5}}, pi, 0.0, 0.0, 1e-6, 0.0);

  json report;
  report["schema"] = "palab-impossibility-v1";
  report["grid"] = {{"c", "0:0.01:0.25"},
                    {"gamma", "0:0.01:0.5"},
                    {"beta", "10^-k, k=0..6"},
                    {"eps", eps_grid},
                    {"contracts", contracts}};
  report["checked"] = checked;
  report["hits"] = hits;
  report["certified"] = certified;
  report["policies"] = std::move(policies);
  report["relaxed"] = {{"gamma", gamma_relaxed}, {"policies", std::move(relaxed)}};
  report["single_policy_edge"] = {{"benchmarks", {0.5}},
                                  {"vacuously_optimal_stable", vacuous}};
  std::filesystem::path dir = prepare_out_dir(opt);
  write_file(dir / "impossibility.json", report.dump(2) + "\n");

  if (!opt.quiet)
    log << "[impossibility] checked=" << checked << " hits=" << hits
        << (certified ? " CERTIFIED" : " NOT CERTIFIED") << ", wrote "
        << (dir / "impossibility.json").string() << "\n";
  return certified ? kExitOk : kExitFailed;
}

}  // namespace

int cmd_run(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] { return run_impl(opt, log); });
}

int cmd_sweep(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] { return sweep_impl(opt, log); });
}

int cmd_audit_bias(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] { return audit_bias_impl(opt, log); });
}

int cmd_verify_lemmas(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] { return verify_lemmas_impl(opt, log); });
}

int cmd_lower_bound(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] { return lower_bound_impl(opt, log); });
}

int cmd_impossibility(const CommandOptions& opt, std::ostream& log) {
  return guarded(log, [&] { return impossibility_impl(opt, log); });
}

}  // namespace palab
