#ifndef PALAB_IO_HPP
#define PALAB_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "palab/harness.hpp"

namespace palab {

// Carries the dotted path of the offending configuration field so the CLI can
// report exactly what to fix (and exit with the config-error code).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Builds a game from its JSON spec.  Supported types: "linear" (contract
// game), "persuasion" (binary-state signaling), "tabular" (explicit payoff
// tables).  Persuasion benchmarks come as {"type": "no_info"|"matrix"|
// "optimal"} entries; "optimal" runs the stable-scheme oracle at a declared
// prior and freezes the resulting scheme into the benchmark set.
std::unique_ptr<Game> game_from_json(const nlohmann::json& spec,
                                     const std::string& prefix = "game");

// A fully materialized experiment: the game, the mechanism bound to it, the
// factories the runner needs, and the plan.  Move-only; the mechanism and the
// factories point into the owned game.
struct ExperimentConfig {
  std::unique_ptr<Game> game;
  std::unique_ptr<Mechanism> mechanism;
  ForecasterFactory forecaster;
  AgentFactory agent;
  StateFactory states;
  ExperimentPlan plan;
  std::string game_kind;
  std::string mechanism_kind;
  std::string forecaster_kind;
  std::string agent_kind;
  std::string states_kind;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
// Parse a JSON file, reporting open/parse problems as ConfigError("config").
nlohmann::json load_json_file(const std::string& path);

ExperimentConfig load_experiment_config(const std::string& path);

ExperimentResult run_config(const ExperimentConfig& config);

// Shortest round-trip decimal form, identical across runs and platforms; all
// CSV/JSON writers share it so reruns are byte-comparable.
std::string format_number(double x);

// CSV writers.  Every file starts with a "# palab-csv <name> v1" version line
// followed by the column header.
void write_transcript_csv(std::ostream& out, const ForecastGrid& grid,
                          const std::vector<TranscriptRow>& rows);
void write_policies_csv(std::ostream& out, const std::vector<Policy>& policies);
void write_audit_csv(std::ostream& out, const std::vector<BiasRow>& bias, std::int64_t horizon);

struct SweepRow {
  std::int64_t horizon = 0;
  double policy_regret = 0.0;
  double swap_rate = 0.0;
  double max_alpha = 0.0;
};

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

// Full diagnostics report: per-benchmark regret with spread, assumption
// rates and certified levels, independence deviations per context, the
// conditional-bias table, per-benchmark decomposition terms, the fitted
// alignment relation, and the two-action disagreement check when applicable.
// Keys are emitted in sorted order so identical runs serialize identically.
nlohmann::json report_json(const Game& game, const ExperimentResult& result,
                           const ExperimentPlan& plan);

}  // namespace palab

#endif
