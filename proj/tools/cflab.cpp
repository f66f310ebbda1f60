// Command-line front end: cflab <subcommand> --config PATH [--out DIR] [--seed N] [--quiet]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cflab/experiment.hpp"

namespace {

using cflab::experiment::RunContext;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* sub, Options& opt) {
  sub->add_option("--config", opt.config, "experiment config (INI)")->required();
  sub->add_option("--out", opt.out, "output directory (overrides outputs.dir)");
  sub->add_option("--seed", opt.seed, "RNG seed (overrides experiment.seed)");
  sub->add_flag("--quiet", opt.quiet, "suppress the summary on stdout");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coagulation-fragmentation experiment runner"};
  app.require_subcommand(1);
  Options opt;

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunContext&);
  };
  const Command commands[] = {
      {"simulate", "integrate the kinetic system and write trajectory/snapshot/field CSVs",
       cflab::experiment::run_simulate},
      {"verify", "check a finished simulate run and write verify_report.csv",
       cflab::experiment::run_verify},
      {"convergence", "compare eps > 0 runs against the eps = 0 characteristics solution",
       cflab::experiment::run_convergence},
      {"characteristics", "integrate and export the characteristic fan",
       cflab::experiment::run_characteristics},
      {"stochastic", "run the particle ensemble and export its moments",
       cflab::experiment::run_stochastic},
  };
  for (const auto& c : commands) add_common(app.add_subcommand(c.name, c.help), opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cflab::experiment::kUsage;
  }

  for (const auto& c : commands) {
    if (!app.got_subcommand(c.name)) continue;
    return cflab::experiment::run_guarded([&] {
      RunContext ctx;
      ctx.config = cflab::load_config(opt.config);
      if (!opt.out.empty()) ctx.config.outputs.dir = opt.out;
      if (opt.seed) ctx.config.seed = *opt.seed;
      ctx.quiet = opt.quiet;
      return c.run(ctx);
    });
  }
  return cflab::experiment::kUsage;
}
