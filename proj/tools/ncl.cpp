#include "ncl/errors.hpp"
#include "ncl/experiment.hpp"
#include "ncl/verify.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Neural-collapse continual learning experiments"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::string seeds;
  std::string grid;
  std::string suite = "all";
  bool dump_relations = false;
  bool checkpoints = false;
  bool dump_buffer = false;

  auto add_run_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "experiment config (JSON)")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides the config)");
    cmd->add_option("--seeds", seeds, "seed list, e.g. 0,1,2 or 0-4 (overrides the config)");
    cmd->add_flag("--dump-relations", dump_relations, "write relation matrices of each task's last batch");
    cmd->add_flag("--checkpoints", checkpoints, "write an encoder checkpoint after every task");
    cmd->add_flag("--dump-buffer", dump_buffer, "write replay buffer contents after every task");
  };

  CLI::App* run = app.add_subcommand("run", "train and evaluate one configuration over its seeds");
  add_run_flags(run);
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
  add_run_flags(ablate);
  ablate->add_option("--grid", grid, "preset (plasticity-stability, pseudo-replay), JSON grid, or grid file")
      ->required();
  CLI::App* verify = app.add_subcommand("verify", "run oracle and invariant suites");
  verify->add_option("--suite", suite, "etf, grad, reservoir, metrics or all");
  verify->add_option("name", suite, "suite name (same as --suite)");
  CLI::App* report = app.add_subcommand("report", "rebuild summary.csv from report files");
  report->add_option("--out", out_dir, "directory holding report_*.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  ncl::RunOptions opts;
  try {
    if (!out_dir.empty()) opts.out = out_dir;
    if (!seeds.empty()) opts.seeds = ncl::parse_seed_list(seeds);
  } catch (const ncl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  opts.dump_relations = dump_relations;
  opts.checkpoints = checkpoints;
  opts.dump_buffer = dump_buffer;

  if (*run) return ncl::cmd_run(config, opts, std::cout, std::cerr);
  if (*ablate) return ncl::cmd_ablate(config, grid, opts, std::cout, std::cerr);
  if (*report) return ncl::cmd_report(out_dir, std::cout, std::cerr);

  std::vector<ncl::verify::SuiteResult> results;
  try {
    results = ncl::verify::run_suites(suite);
  } catch (const ncl::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 64;
  }
  bool ok = true;
  for (const auto& r : results) {
    ncl::verify::print(r, std::cout);
    ok = ok && r.passed();
  }
  return ok ? 0 : 1;
}
