#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relkit/cli/commands.hpp"

int main(int argc, char** argv) {
  namespace rc = relkit::cli;
  CLI::App app{"relkit: relativistic dynamics and control scenarios"};
  app.require_subcommand(1);

  std::string config;
  rc::CommandOptions opts;
  const auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "scenario file (YAML)")->required();
    cmd->add_option("--out-dir", opts.out_dir, "directory for CSV and JSON outputs");
    cmd->add_flag("--gnuplot-script", opts.gnuplot_script, "also write a gnuplot script next to each CSV");
  };
  auto* simulate = app.add_subcommand("simulate", "closed-loop or open-loop simulation");
  auto* steer = app.add_subcommand("steer", "minimum-energy steering between two states");
  auto* compare = app.add_subcommand("compare", "Newtonian versus relativistic controller study");
  auto* validate = app.add_subcommand("validate", "parse and check a scenario without running it");
  add_run_options(simulate);
  add_run_options(steer);
  add_run_options(compare);
  validate->add_option("--config", config, "scenario file (YAML)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rc::kExitValidation;
  }

  if (*simulate) return rc::cmd_simulate(config, opts, std::cerr);
  if (*steer) return rc::cmd_steer(config, opts, std::cerr);
  if (*compare) return rc::cmd_compare(config, opts, std::cerr);
  return rc::cmd_validate(config, std::cout, std::cerr);
}
