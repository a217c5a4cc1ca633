#include <iostream>

#include "CLI11.hpp"
#include "threshold_sparse_cli/commands.hpp"

using namespace threshold_sparse::cli;

int main(int argc, char** argv) {
  CLI::App app{"Two-step sparse threshold regression: fit, simulate, report"};
  app.require_subcommand(1);

  CommandOptions opts;
  std::string data_path;
  std::string profile_path;
  std::vector<std::string> csvs;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("-c,--config", opts.config_path, "flat key=value config file");
    if (needs_config) c->required();
    sub->add_option("-s,--set", opts.overrides, "override a config entry (key=value), repeatable");
    sub->add_option("-o,--out", opts.output_dir, "output directory")->capture_default_str();
    sub->add_option("-t,--threads", opts.threads,
                    "worker threads (0: THRESHOLD_SPARSE_THREADS or all cores)")
        ->capture_default_str();
    sub->add_flag("-v,--verbose", opts.verbosity, "progress messages on stderr");
  };

  auto* fit = app.add_subcommand("fit", "fit the estimator to a CSV dataset (columns y, q, regressors)");
  add_common(fit, true);
  fit->add_option("-d,--data", data_path, "dataset CSV")->required();

  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  add_common(sim, true);

  auto* rep = app.add_subcommand("report", "merge replication CSVs into summary tables");
  rep->add_option("-o,--out", opts.output_dir, "output directory")->capture_default_str();
  rep->add_option("--profile", profile_path, "profile.csv from `fit` to convert for plotting");
  rep->add_option("replications", csvs, "replications.csv files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitFailure;
  }

  if (fit->parsed()) return cmd_fit(data_path, opts, std::cout, std::cerr);
  if (sim->parsed()) return cmd_simulate(opts, std::cout, std::cerr);
  return cmd_report(csvs, profile_path, opts, std::cout, std::cerr);
}
