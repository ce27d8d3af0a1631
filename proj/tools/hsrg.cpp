// hsrg: batch front-end for the half-space one-loop flow library.
#include <CLI11.hpp>
#include <iostream>

#include "hsrg/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Half-space phi^4 flow: propagators, one-loop kernels, tree weights, bounds and sampling"};
  app.require_subcommand(1, 1);
  std::string config_path;
  hsrg::CommandOptions opt;
  std::string out_dir = "out";
  std::string snapshot;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "INI configuration file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--strict", opt.strict, "exit with code 4 when a bound check is violated");
  auto* seed_opt = app.add_option("--seed", seed, "generator seed (sample)");
  for (const char* name : {"propagator", "flow", "trees", "bounds", "converge", "sample"}) app.add_subcommand(name);
  app.get_subcommand("flow")->add_option("--snapshot", snapshot, "rewrite the counterterm tables from a snapshot");
  app.fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hsrg::kExitConfig;
  }
  opt.out = out_dir;
  if (*seed_opt) opt.seed = seed;
  if (!snapshot.empty()) opt.snapshot = snapshot;
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = hsrg::RunConfig::from_file(config_path);
    const auto res = hsrg::run_command(name, cfg, opt);
    for (const auto& v : res.violations) std::cerr << "violation: " << v << "\n";
    return res.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return hsrg::exit_code_for(e);
  }
}
