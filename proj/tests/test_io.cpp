#include "palab/io.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

using namespace palab;
using nlohmann::json;

namespace {

json linear_game_spec() {
  return json{{"type", "linear"},
              {"actions", {"idle", "effort"}},
              {"costs", {0.0, 0.3}},
              {"outcome_values", {0.2, 1.0, 0.1}},
              {"outcome_of", {{0, 0}, {1, 2}}},
              {"benchmarks", {0.5, 0.7}},
              {"states", {"good", "bad"}}};
}

json prosecutor_game_spec() {
  return json{{"type", "persuasion"},
              {"strategies", {"acquit", "convict"}},
              {"agent_utility", {{1.0, 0.0}, {0.0, 1.0}}},
              {"principal_value", {0.0, 1.0}},
              {"benchmarks",
               {{{"type", "no_info"}, {"signal", 0}},
                {{"type", "matrix"}, {"probs", {1.0, 0.0, 0.0, 1.0}}},
                {{"type", "optimal"},
                 {"beta", 0.1},
                 {"x", 0.05},
                 {"delta", 0.0005},
                 {"prior", 0.3}}}}};
}

json base_config() {
  return json{{"game", linear_game_spec()},
              {"mechanism", {{"type", "benchmark-best"}}},
              {"forecaster", {{"type", "calibrated"}, {"resolution", 16}}},
              {"agent", {{"type", "follower"}}},
              {"states", {{"type", "iid"}, {"probs", {0.5, 0.5}}}},
              {"horizon", 64},
              {"repetitions", 2},
              {"seed", 5}};
}

template <class F>
std::string config_error_field(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("linear games load from JSON") {
  std::unique_ptr<Game> game = game_from_json(linear_game_spec());
  CHECK(game->kind() == "linear");
  CHECK(game->num_actions() == 2);
  CHECK(game->num_states() == 2);
  REQUIRE(game->benchmarks().size() == 2);
  CHECK(game->benchmarks()[0].params[0] == doctest::Approx(0.5).epsilon(1e-12));
  // U(effort, 0.5, good) = 0.5*1.0 - 0.3; V = 0.5*1.0.
  CHECK(game->agent_payoff(1, game->benchmarks()[0], 0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(game->principal_payoff(1, game->benchmarks()[0], 0) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tabular games load from JSON") {
  json spec = {{"type", "tabular"},
               {"u", {{{0.3, 0.8}}, {{0.6, 0.2}}}},
               {"v", {{{1.0, 0.2}}, {{0.3, 0.9}}}},
               {"benchmarks", {0}}};
  std::unique_ptr<Game> game = game_from_json(spec);
  CHECK(game->kind() == "tabular");
  CHECK(game->num_actions() == 2);
  CHECK(game->num_states() == 2);
  Policy p0 = game->benchmarks()[0];
  CHECK(game->agent_payoff(1, p0, 1) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("persuasion games load with all three benchmark forms") {
  std::unique_ptr<Game> game = game_from_json(prosecutor_game_spec());
  CHECK(game->kind() == "persuasion");
  CHECK(game->num_states() == 2);
  REQUIRE(game->benchmarks().size() == 3);

  // The uninformative scheme sends signal 0 in both states.
  const Policy& no_info = game->benchmarks()[0];
  REQUIRE(no_info.params.size() == 4);
  CHECK(no_info.params[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(no_info.params[1] == doctest::Approx(0.0).epsilon(1e-12));

  // The matrix benchmark passes through verbatim.
  CHECK(game->benchmarks()[1].params == std::vector<double>{1.0, 0.0, 0.0, 1.0});

  // The oracle-derived scheme is a valid conditional matrix.
  const Policy& derived = game->benchmarks()[2];
  REQUIRE(derived.params.size() == 4);
  for (double p : derived.params) {
    CHECK(p >= -1e-12);
    CHECK(p <= 1.0 + 1e-12);
  }
  CHECK(derived.params[0] + derived.params[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(derived.params[2] + derived.params[3] == doctest::Approx(1.0).epsilon(1e-9));

  // At the prior it was derived for, the stable scheme keeps most of the
  // optimal conviction value (0.6 at prior 0.3).
  const auto* per = dynamic_cast<const PersuasionGame*>(game.get());
  REQUIRE(per != nullptr);
  Forecast prior = {0.7, 0.3};
  auto [u, v] = expected_utilities(*per, per->identity_action(), derived, prior);
  CHECK(v >= 0.4);
  CHECK(v <= 0.6 + 1e-9);
}

TEST_CASE("config errors name the offending field") {
  CHECK(config_error_field([] { game_from_json(json{{"x", 1}}); }) == "game.type");
  CHECK(config_error_field([] { game_from_json(json{{"type", "chess"}}); }) == "game.type");

  json bad_outcome = linear_game_spec();
  bad_outcome["outcome_of"] = {{0, 0}, {1, 7}};
  CHECK(config_error_field([&] { game_from_json(bad_outcome); }) == "game.outcome_of[1]");

  json bad_row = prosecutor_game_spec();
  bad_row["benchmarks"][1]["probs"] = {0.5, 0.0, 0.0, 1.0};
  CHECK(config_error_field([&] { game_from_json(bad_row); }) ==
        "game.benchmarks[1].probs");

  CHECK(config_error_field([] { parse_experiment_config(json::array()); }) == "config");

  json no_horizon = base_config();
  no_horizon.erase("horizon");
  CHECK(config_error_field([&] { parse_experiment_config(no_horizon); }) == "horizon");

  json bad_agent = base_config();
  bad_agent["agent"]["type"] = "psychic";
  CHECK(config_error_field([&] { parse_experiment_config(bad_agent); }) == "agent.type");

  json bad_fc = base_config();
  bad_fc["forecaster"]["type"] = "astrology";
  CHECK(config_error_field([&] { parse_experiment_config(bad_fc); }) == "forecaster.type");

  json bad_probs = base_config();
  bad_probs["states"]["probs"] = {0.5, 0.4};
  CHECK(config_error_field([&] { parse_experiment_config(bad_probs); }) == "states.probs");

  json bad_pair = base_config();
  bad_pair["pair_replays"] = {{5, 0}};
  CHECK(config_error_field([&] { parse_experiment_config(bad_pair); }) == "pair_replays[0]");

  json short_script = base_config();
  short_script["states"] = {{"type", "fixed"}, {"sequence", {0, 1, 0}}};
  CHECK(config_error_field([&] { parse_experiment_config(short_script); }) ==
        "states.sequence");

  json wrong_oracle = base_config();
  wrong_oracle["game"] = {{"type", "tabular"},
                          {"u", {{{0.0}}, {{1.0}}}},
                          {"v", {{{0.0}}, {{1.0}}}},
                          {"benchmarks", {0}}};
  wrong_oracle["states"] = {{"type", "iid"}, {"probs", {1.0}}};
  wrong_oracle["mechanism"] = {{"type", "linear-oracle"}, {"beta", 0.1}, {"delta", 0.125}};
  CHECK(config_error_field([&] { parse_experiment_config(wrong_oracle); }) ==
        "mechanism.type");

  CHECK(config_error_field([] { load_experiment_config("/nonexistent/config.json"); }) ==
        "config");
}

TEST_CASE("parsed configs run and reproduce bitwise") {
  json doc = base_config();
  doc["pair_replays"] = {{0, 1}};
  ExperimentConfig a = parse_experiment_config(doc);
  CHECK(a.game_kind == "linear");
  CHECK(a.mechanism_kind == "benchmark-best");
  CHECK(a.forecaster_kind == "calibrated");
  CHECK(a.agent_kind == "follower");
  CHECK(a.states_kind == "iid");
  CHECK(a.plan.horizon == 64);
  CHECK(a.plan.repetitions == 2);
  CHECK(a.plan.seed == 5);
  CHECK(a.plan.grid_resolution == 16);
  CHECK(a.plan.families == EventFamilies::kBenchmark);
  REQUIRE(a.plan.pair_replays.size() == 1);

  ExperimentResult ra = run_config(a);
  ExperimentConfig b = parse_experiment_config(doc);
  ExperimentResult rb = run_config(b);

  std::string report_a = report_json(*a.game, ra, a.plan).dump(2);
  std::string report_b = report_json(*b.game, rb, b.plan).dump(2);
  CHECK(report_a == report_b);

  std::ostringstream csv_a, csv_b;
  write_transcript_csv(csv_a, ra.grid, ra.reps[0].realized.rows);
  write_transcript_csv(csv_b, rb.grid, rb.reps[0].realized.rows);
  CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("oracle mechanisms parse with their event families") {
  json doc = base_config();
  doc["mechanism"] = {{"type", "linear-oracle"}, {"beta", 0.25}, {"delta", 0.125}};
  ExperimentConfig cfg = parse_experiment_config(doc);
  CHECK(cfg.mechanism_kind == "linear-oracle");
  CHECK(cfg.plan.families == EventFamilies::kOracle);
  CHECK(cfg.mechanism->optimism() == doctest::Approx(0.3 * 0.25 / 2).epsilon(1e-12));

  // An explicit selector overrides the default.
  doc["events"] = "benchmark";
  CHECK(parse_experiment_config(doc).plan.families == EventFamilies::kBenchmark);

  json pdoc = {{"game", prosecutor_game_spec()},
               {"mechanism",
                {{"type", "persuasion-oracle"},
                 {"beta", 0.1},
                 {"x", 0.05},
                 {"delta", 0.0005},
                 {"optimism", 0.05}}},
               {"agent", {{"type", "follower"}}},
               {"states", {{"type", "iid"}, {"probs", {0.7, 0.3}}}},
               {"horizon", 8},
               {"repetitions", 1}};
  ExperimentConfig pcfg = parse_experiment_config(pdoc);
  CHECK(pcfg.mechanism_kind == "persuasion-oracle");
  CHECK(pcfg.mechanism->optimism() == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(pcfg.plan.families == EventFamilies::kOracle);
}

TEST_CASE("adversary agents parse trigger parameters") {
  json doc = base_config();
  doc["game"] = {{"type", "linear"},
                 {"actions", {"work", "shirk"}},
                 {"costs", {1.0, 0.0}},
                 {"outcome_values", {0.0, 2.0}},
                 {"outcome_of", {{1, 0}, {0, 0}}},
                 {"benchmarks", {0.5, 0.6}},
                 {"states", {"M", "H"}}};
  doc["agent"] = {{"type", "adversary-L"}, {"work_prob_on_high", 0.25}};
  doc["states"] = {{"type", "pinned-fair"}, {"first", 0}};
  ExperimentConfig cfg = parse_experiment_config(doc);
  CHECK(cfg.agent_kind == "adversary-L");
  CHECK(cfg.states_kind == "pinned-fair");
  ExperimentResult res = run_config(cfg);
  CHECK(res.reps.size() == 2);
  CHECK(res.reps[0].realized.rows.size() == 64);
}

TEST_CASE("csv writers emit versioned deterministic tables") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0) == "1.0");
  CHECK(format_number(-0.25) == "-0.25");

  json doc = base_config();
  ExperimentConfig cfg = parse_experiment_config(doc);
  ExperimentResult res = run_config(cfg);

  std::ostringstream transcript;
  write_transcript_csv(transcript, res.grid, res.reps[0].realized.rows);
  std::istringstream lines(transcript.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "# palab-csv transcript v1");
  std::getline(lines, line);
  CHECK(line == "t,pi_0,pi_1,p,r,a,y,U,V");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 64);

  std::ostringstream policies;
  write_policies_csv(policies, {Policy{{0.5}}, Policy{{0.25, 0.75}}});
  CHECK(policies.str() ==
        "# palab-csv policies v1\nid,param_0,param_1\n0,0.5,\n1,0.25,0.75\n");

  std::ostringstream audit;
  write_audit_csv(audit, res.bias, cfg.plan.horizon);
  std::istringstream audit_lines(audit.str());
  std::getline(audit_lines, line);
  CHECK(line == "# palab-csv audit v1");
  std::getline(audit_lines, line);
  CHECK(line == "event_id,n_E,alpha,T");
  int audit_rows = 0;
  while (std::getline(audit_lines, line)) ++audit_rows;
  CHECK(audit_rows == static_cast<int>(res.bias.size()));

  std::ostringstream sweep;
  write_sweep_csv(sweep, {{1024, 0.25, 0.0625, 0.125}});
  CHECK(sweep.str() == "# palab-csv sweep v1\nT,PR,SwapReg,max_alpha\n1024,0.25,0.0625,0.125\n");
}

TEST_CASE("reports carry every diagnostic block") {
  json doc = base_config();
  doc["agent"] = {{"type", "swap"}};
  doc["horizon"] = 256;
  ExperimentConfig cfg = parse_experiment_config(doc);
  ExperimentResult res = run_config(cfg);
  json report = report_json(*cfg.game, res, cfg.plan);

  CHECK(report["schema"] == "palab-report-v1");
  CHECK(report["game"] == "linear");
  CHECK(report["horizon"] == 256);
  CHECK(report.contains("bias"));
  CHECK(report.contains("regret"));
  CHECK(report["regret"]["per_benchmark"].size() == 2);
  CHECK(report.contains("assumptions"));
  CHECK(report["assumptions"]["per_rep"].size() == 2);
  CHECK(report["assumptions"]["epsilon_swap"].get<double>() >= 0.0);
  CHECK(report["assumptions"]["epsilon_neg"].get<double>() >= 0.0);
  CHECK(report.contains("alignment_fit"));
  CHECK(report["alignment_fit"]["points"] == 2);
  CHECK(report.contains("decomposition"));
  CHECK(report["decomposition_identity_gap_max"].get<double>() <= 1e-9);
  CHECK(report.contains("disagreement"));
  CHECK(report["disagreement"]["violations"] == 0);
  CHECK(report["policies"].size() == res.table.policies.size());

  // The follower's deviations vanish, and its report is byte-stable.
  json fdoc = base_config();
  ExperimentConfig fcfg = parse_experiment_config(fdoc);
  ExperimentResult fres = run_config(fcfg);
  json freport = report_json(*fcfg.game, fres, fcfg.plan);
  for (const json& dev : freport["assumptions"]["deviations"])
    CHECK(dev["u_deviation_mean"].get<double>() <= 1e-12);
  CHECK(freport["disagreement"]["count_max"] == 0);
}
