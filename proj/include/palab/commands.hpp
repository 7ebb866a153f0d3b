#ifndef PALAB_COMMANDS_HPP
#define PALAB_COMMANDS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>

namespace palab {

// Shared switches for every subcommand, mirroring the CLI flags.  Keeping the
// command bodies in the library lets the tests drive them without spawning
// processes; main() only parses argv into this struct.
struct CommandOptions {
  std::string config_path;     // --config; most subcommands require it
  std::string out_dir = ".";   // --out; artifacts are written here
  std::int64_t seed = -1;      // --seed; >= 0 overrides the config seed
  int repetitions = 0;         // --reps; > 0 overrides the config count
  bool quiet = false;          // --quiet; suppress progress lines
  bool inject_mutant = false;  // verify-lemmas fault injection (test hook)
};

// Exit codes shared by all subcommands.
constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;        // the command ran and its check failed
constexpr int kExitConfigError = 2;   // bad or missing configuration
constexpr int kExitRuntimeError = 3;  // valid config, but execution failed

// One experiment: writes transcript.csv (first repetition), policies.csv,
// audit.csv and report.json.
int cmd_run(const CommandOptions& opt, std::ostream& log);

// One experiment per horizon in the config's "horizons" list; writes
// sweep.csv and sweep.json with the fitted log-log regret and bias slopes.
int cmd_sweep(const CommandOptions& opt, std::ostream& log);

// Forecast-bias audit of the configured stream: one repetition, no replays;
// writes audit.csv and audit.json.
int cmd_audit_bias(const CommandOptions& opt, std::ostream& log);

// Randomized property suites for the game and oracle layers; writes
// lemmas.json.  Nonzero exit if any suite fails or runs short of its floor.
int cmd_verify_lemmas(const CommandOptions& opt, std::ostream& log);

// Scripted-adversary attack on the configured mechanism over the two pinned
// first-state distributions; writes lower_bound.csv and lower_bound.json.
int cmd_lower_bound(const CommandOptions& opt, std::ostream& log);

// Exhaustive certification that the two-contract counterexample admits no
// optimal stable policy on the parameter grid; writes impossibility.json and
// exits 0 iff certified.
int cmd_impossibility(const CommandOptions& opt, std::ostream& log);

}  // namespace palab

#endif
