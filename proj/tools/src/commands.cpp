#include "threshold_sparse_cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "threshold_sparse/errors.hpp"
#include "threshold_sparse/experiment_io.hpp"
#include "threshold_sparse_cli/config.hpp"

namespace threshold_sparse::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error";
    if (!e.key().empty()) err << " [" << e.key() << "]";
    err << ": " << e.what() << '\n';
    return kExitBadInput;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const EmptyGridError& e) {
    err << "grid error: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const InvalidArgument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return kExitBadInput;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ExperimentError& e) {
    err << "experiment error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

ConfigMap load_config(const CommandOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("config", "a config file is required");
  ConfigMap cfg = read_config_file(opts.config_path);
  apply_overrides(cfg, opts.overrides);
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  return f;
}

json named(const Vector& v, const std::vector<std::string>& names) {
  json o = json::object();
  for (Index j = 0; j < v.size(); ++j) o[names[static_cast<std::size_t>(j)]] = v(j);
  return o;
}

json names_of(const ActiveSet& s, const std::vector<std::string>& names) {
  json a = json::array();
  for (const Index j : s.indices) a.push_back(names[static_cast<std::size_t>(j)]);
  return a;
}

json coefficient_json(const CoefficientPair& c, const std::vector<std::string>& names) {
  return json{{"beta", named(c.beta, names)}, {"delta", named(c.delta, names)}};
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("THRESHOLD_SPARSE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int cmd_fit(const std::string& csv_path, const CommandOptions& opts, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    ConfigMap raw = load_config(opts);
    const Dataset data = load_dataset_csv(csv_path);
    FitConfig cfg = resolve_fit_config(raw, data.p());
    cfg.sweep.threads = resolve_threads(opts.threads);

    const auto start = std::chrono::steady_clock::now();
    const TwoStepFit fit = fit_full(data, cfg);
    const double fit_ms = elapsed_ms(start);
    const auto& names = data.feature_names();

    const ThresholdDesign at_hat(data, fit.lasso.tau_hat, cfg.direction);
    const PenaltyWeights weights = penalty_weights(at_hat);
    json locked = json::array();
    for (Index j = 0; j < weights.size(); ++j) {
      if (!weights.zero_locked(j)) continue;
      const auto& nm = names[static_cast<std::size_t>(j % data.p())];
      locked.push_back((j < data.p() ? "beta:" : "delta:") + nm);
    }
    const auto& best = fit.lasso.profile.records[fit.lasso.profile.argmin_index];

    json doc;
    doc["data"] = {{"path", csv_path}, {"n", data.n()}, {"p", data.p()}};
    doc["config"] = {
        {"loss", to_string(cfg.spec.kind)},
        {"gamma", cfg.spec.gamma},
        {"lambda", cfg.lambda},
        {"mu", cfg.scad.mu},
        {"scad_a", cfg.scad.a},
        {"direction", to_string(cfg.direction)},
        {"grid", {{"mode", to_string(cfg.grid.mode.kind)},
                  {"points", cfg.grid.mode.points},
                  {"tau_low", cfg.grid.low},
                  {"tau_high", cfg.grid.high},
                  {"size", fit.lasso.grid.size()}}},
    };
    doc["lasso"] = {
        {"tau_hat", fit.lasso.tau_hat},
        {"objective", fit.lasso.objective},
        {"kkt_violation", best.kkt_violation},
        {"excluded_grid_points", fit.lasso.profile.excluded},
        {"alpha_hat", coefficient_json(fit.lasso.alpha_hat, names)},
        {"active_beta", names_of(active_set(fit.lasso.alpha_hat.beta, cfg.active_tol), names)},
        {"active_delta", names_of(active_set(fit.lasso.alpha_hat.delta, cfg.active_tol), names)},
        {"zero_locked", locked},
    };
    doc["scad"] = {
        {"objective", fit.scad_solve.objective},
        {"kkt_violation", fit.scad_solve.kkt_violation},
        {"converged", fit.scad_solve.converged},
        {"iterations", fit.scad_solve.iterations},
        {"alpha_tilde", coefficient_json(fit.alpha_tilde, names)},
        {"weights", coefficient_json(CoefficientPair::from_alpha(fit.scad_weights), names)},
    };
    doc["tau_tilde"] = fit.tau_tilde;
    doc["active_beta"] = names_of(fit.active_beta, names);
    doc["active_delta"] = names_of(fit.active_delta, names);
    doc["timings_ms"] = {{"fit", fit_ms}};

    fs::create_directories(opts.output_dir);
    {
      auto f = open_output(fs::path(opts.output_dir) / "fit.json");
      f << doc.dump(2) << '\n';
    }
    {
      auto f = open_output(fs::path(opts.output_dir) / "profile.csv");
      f << "tau,objective,converged,kkt_violation,iterations,n_active\n";
      for (const auto& r : fit.lasso.profile.records) {
        f << format_double(r.tau) << ',' << format_double(r.objective) << ',' << (r.converged ? 1 : 0)
          << ',' << format_double(r.kkt_violation) << ',' << r.iterations << ','
          << active_set(r.alpha, cfg.active_tol).size() << '\n';
      }
    }
    out << "tau_hat=" << fit.lasso.tau_hat << " tau_tilde=" << fit.tau_tilde
        << " active_beta=" << fit.active_beta.size() << " active_delta=" << fit.active_delta.size()
        << '\n';
    return kExitOk;
  });
}

int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig cfg = resolve_experiment_config(load_config(opts));
    const int threads = resolve_threads(opts.threads);
    if (opts.verbosity > 0) {
      err << "simulate: design=" << to_string(cfg.design) << " n=" << cfg.n << " p=" << cfg.p
          << " replications=" << cfg.replications << " threads=" << threads << '\n';
    }
    const auto start = std::chrono::steady_clock::now();
    const ExperimentResult res = run_experiment(cfg, threads);
    if (opts.verbosity > 0) err << "simulate: finished in " << elapsed_ms(start) / 1000.0 << " s\n";

    fs::create_directories(opts.output_dir);
    const fs::path dir(opts.output_dir);
    {
      auto f = open_output(dir / "replications.csv");
      write_replications_csv(f, ReplicationTable{res.summary.design, cfg.n, cfg.p, res.records});
    }
    {
      auto f = open_output(dir / "summary.md");
      write_summary_markdown(f, {res.summary});
    }
    {
      auto f = open_output(dir / "summary.csv");
      write_summary_csv(f, {res.summary});
    }
    {
      auto f = open_output(dir / "timings.csv");
      write_timings_csv(f, res.records);
    }
    write_summary_markdown(out, {res.summary});
    return kExitOk;
  });
}

int cmd_report(const std::vector<std::string>& csv_paths, const std::string& profile_csv,
               const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (csv_paths.empty() && profile_csv.empty()) {
      throw DataError("nothing to report: give replication CSVs and/or --profile");
    }
    // pool the records of each (design, n, p) cell across files
    std::vector<ReplicationTable> cells;
    for (const auto& path : csv_paths) {
      std::ifstream in(path);
      if (!in) throw DataError("cannot open '" + path + "'");
      for (auto& t : read_replications_csv(in)) {
        auto it = std::find_if(cells.begin(), cells.end(), [&](const ReplicationTable& c) {
          return c.design == t.design && c.n == t.n && c.p == t.p;
        });
        if (it == cells.end()) {
          cells.push_back(std::move(t));
        } else {
          it->records.insert(it->records.end(), t.records.begin(), t.records.end());
        }
      }
    }
    std::stable_sort(cells.begin(), cells.end(), [](const ReplicationTable& a, const ReplicationTable& b) {
      if (a.design != b.design) return a.design < b.design;
      if (a.n != b.n) return a.n < b.n;
      return a.p < b.p;
    });

    std::string profile_dat;
    if (!profile_csv.empty()) {
      std::ifstream in(profile_csv);
      if (!in) throw DataError("cannot open '" + profile_csv + "'");
      std::string line;
      if (!std::getline(in, line) || line.rfind("tau,objective,converged", 0) != 0) {
        throw DataError("'" + profile_csv + "' is not a profile.csv written by `fit`");
      }
      std::ostringstream dat;
      dat << "# tau objective converged\n";
      while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string tau, obj, conv;
        if (!std::getline(row, tau, ',') || !std::getline(row, obj, ',') || !std::getline(row, conv, ',')) {
          throw DataError("malformed profile row: '" + line + "'");
        }
        dat << tau << ' ' << obj << ' ' << conv << '\n';
      }
      profile_dat = dat.str();
    }

    std::vector<ExperimentSummary> summaries;
    for (const auto& c : cells) summaries.push_back(summarize(c.design, c.n, c.p, c.records));

    fs::create_directories(opts.output_dir);
    const fs::path dir(opts.output_dir);
    if (!summaries.empty()) {
      {
        auto f = open_output(dir / "summary.md");
        write_summary_markdown(f, summaries);
      }
      {
        auto f = open_output(dir / "summary.csv");
        write_summary_csv(f, summaries);
      }
      write_summary_markdown(out, summaries);
    }
    if (!profile_dat.empty()) {
      auto f = open_output(dir / "profile.dat");
      f << profile_dat;
    }
    return kExitOk;
  });
}

}  // namespace threshold_sparse::cli
