// Command-line front end: synth | estimate | run | montecarlo.
//
// Each subcommand reads a key=value config file and writes its artifacts
// into --out. Exit codes: 0 success, 1 usage/config error, 2 numerical
// failure, 3 I/O error.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "wbfm/wbfm.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int workers = 1;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_workers) {
  cmd->add_option("--config", args.config_path, "key=value configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed, "override the config seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
  if (needs_workers)
    cmd->add_option("--workers", args.workers, "concurrent Monte-Carlo runs")
        ->check(CLI::PositiveNumber);
  cmd->add_flag("--verbose", args.verbose, "progress output on stderr");
}

wbfm::cli::ExperimentConfig load(const CommonArgs& args) {
  wbfm::cli::ExperimentConfig cfg =
      wbfm::cli::parse_experiment_config(wbfm::io::load_config(args.config_path));
  if (args.seed_given) cfg.seed = args.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint frequency-modulation and spectrum estimation"};
  app.require_subcommand(1);

  CommonArgs synth_args, est_args, run_args, mc_args;
  CLI::App* synth = app.add_subcommand("synth", "generate one modulated observation");
  add_common(synth, synth_args, false);
  CLI::App* estimate = app.add_subcommand("estimate", "run the estimator on a stored signal");
  add_common(estimate, est_args, false);
  CLI::App* run = app.add_subcommand("run", "synth + estimate in one directory");
  add_common(run, run_args, false);
  CLI::App* mc = app.add_subcommand("montecarlo", "repeated runs over consecutive seeds");
  add_common(mc, mc_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      wbfm::cli::cmd_synth(load(synth_args), synth_args.out_dir, synth_args.verbose);
    } else if (estimate->parsed()) {
      wbfm::cli::cmd_estimate(load(est_args), est_args.out_dir, est_args.verbose);
    } else if (run->parsed()) {
      wbfm::cli::cmd_run(load(run_args), run_args.out_dir, run_args.verbose);
    } else if (mc->parsed()) {
      wbfm::cli::cmd_montecarlo(load(mc_args), mc_args.out_dir, mc_args.workers,
                                mc_args.verbose);
    }
  } catch (const wbfm::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const wbfm::numeric_error& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const wbfm::io_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
