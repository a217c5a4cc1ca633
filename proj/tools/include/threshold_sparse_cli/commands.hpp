#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace threshold_sparse::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,    ///< usage or I/O problem
  kExitBadInput = 2,   ///< data or config error
  kExitNumerical = 3,  ///< solver or experiment-level failure
};

struct CommandOptions {
  std::string config_path;
  std::vector<std::string> overrides;  ///< key=value, applied after the file
  std::string output_dir = ".";
  int threads = 0;  ///< 0: THRESHOLD_SPARSE_THREADS, else hardware concurrency
  int verbosity = 0;
};

/// 0 -> environment variable -> hardware concurrency (at least 1).
int resolve_threads(int requested);

/// Fits the two-step estimator to a CSV dataset; writes fit.json and profile.csv.
int cmd_fit(const std::string& csv_path, const CommandOptions& opts, std::ostream& out,
            std::ostream& err);

/// Runs a Monte Carlo experiment; writes replications.csv, summary.md,
/// summary.csv and timings.csv.
int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Re-aggregates replication CSVs into summary.md / summary.csv. With a
/// profile.csv from `fit`, also writes a whitespace-separated profile.dat.
int cmd_report(const std::vector<std::string>& csv_paths, const std::string& profile_csv,
               const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace threshold_sparse::cli
