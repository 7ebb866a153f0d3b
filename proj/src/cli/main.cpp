#include <iostream>

#include "CLI11.hpp"
#include "palab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"palab: simulation laboratory for repeated principal-agent games"};
  app.require_subcommand(1);

  palab::CommandOptions opt;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config_path, "JSON configuration file");
    cmd->add_option("--out", opt.out_dir, "output directory (default: .)");
    cmd->add_option("--seed", opt.seed, "override the config seed");
    cmd->add_option("--reps", opt.repetitions, "override the repetition/case count");
    cmd->add_flag("--quiet", opt.quiet, "suppress progress lines");
  };

  CLI::App* run =
      app.add_subcommand("run", "run one experiment; writes transcript/policies/audit CSV and "
                                "report JSON");
  add_common(run);
  CLI::App* sweep =
      app.add_subcommand("sweep", "run the experiment at every horizon in the config's "
                                  "\"horizons\" list; writes sweep CSV/JSON with decay slopes");
  add_common(sweep);
  CLI::App* audit =
      app.add_subcommand("audit-bias", "audit the forecaster's conditional bias on the "
                                       "configured stream; writes audit CSV/JSON");
  add_common(audit);
  CLI::App* lemmas =
      app.add_subcommand("verify-lemmas", "run the randomized property suites; nonzero exit "
                                          "on any failure");
  add_common(lemmas);
  lemmas->add_flag("--inject-mutant", opt.inject_mutant,
                   "test hook: flip the stability inequality so the suites must fail");
  CLI::App* lower =
      app.add_subcommand("lower-bound", "attack the configured mechanism with the scripted "
                                        "adversary over both pinned first-state distributions");
  add_common(lower);
  CLI::App* imposs =
      app.add_subcommand("impossibility", "certify that the two-contract counterexample "
                                          "admits no optimal stable policy; exit 0 iff certified");
  add_common(imposs);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    // Treat every command-line problem as a configuration error; --help and
    // --version land here too but exit cleanly.
    return code == 0 ? palab::kExitOk : palab::kExitConfigError;
  }

  if (run->parsed()) return palab::cmd_run(opt, std::cout);
  if (sweep->parsed()) return palab::cmd_sweep(opt, std::cout);
  if (audit->parsed()) return palab::cmd_audit_bias(opt, std::cout);
  if (lemmas->parsed()) return palab::cmd_verify_lemmas(opt, std::cout);
  if (lower->parsed()) return palab::cmd_lower_bound(opt, std::cout);
  if (imposs->parsed()) return palab::cmd_impossibility(opt, std::cout);
  return palab::kExitConfigError;
}
