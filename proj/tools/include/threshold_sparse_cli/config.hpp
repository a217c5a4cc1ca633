#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "threshold_sparse/pipeline.hpp"
#include "threshold_sparse/simulation.hpp"

namespace threshold_sparse::cli {

/// Flat `key = value` settings. Later entries (overrides) replace earlier ones.
using ConfigMap = std::map<std::string, std::string>;

/// Every key the tool understands.
const std::vector<std::string>& known_keys();

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Throws ConfigError for malformed lines, unknown keys and duplicates.
ConfigMap parse_config_text(std::istream& in);
ConfigMap read_config_file(const std::string& path);

/// Applies `key=value` strings on top of `cfg`.
void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides);

/// Estimator settings for a dataset with `p` regressors (needed to resolve mu=auto).
/// Requires `loss` and `lambda`.
FitConfig resolve_fit_config(const ConfigMap& cfg, Index p);

/// Monte Carlo settings. Requires `design`, `n`, `p` and `replications`; the
/// estimator keys default to the table values of the chosen design.
ExperimentConfig resolve_experiment_config(const ConfigMap& cfg);

}  // namespace threshold_sparse::cli
