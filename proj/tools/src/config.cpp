#include "threshold_sparse_cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_known(const std::string& key) {
  const auto& keys = known_keys();
  return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::pair<std::string, std::string> split_pair(const std::string& text, const std::string& where) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError(trim(text), where + ": expected key=value, got '" + text + "'");
  std::string key = trim(text.substr(0, eq));
  std::string value = trim(text.substr(eq + 1));
  if (key.empty()) throw ConfigError("", where + ": empty key");
  if (!is_known(key)) throw ConfigError(key, where + ": unknown key '" + key + "'");
  if (value.empty()) throw ConfigError(key, where + ": key '" + key + "' has an empty value");
  return {std::move(key), std::move(value)};
}

// Typed lookups. Each names the key when the value does not parse.
class Reader {
 public:
  explicit Reader(const ConfigMap& cfg) : cfg_(cfg) {}

  bool has(const std::string& key) const { return cfg_.count(key) > 0; }

  const std::string& raw(const std::string& key) const {
    const auto it = cfg_.find(key);
    if (it == cfg_.end()) throw ConfigError(key, "missing required key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    const std::string& s = raw(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw ConfigError(key, "key '" + key + "': '" + s + "' is not a finite number");
    }
    return v;
  }

  double real(const std::string& key, double fallback) const { return has(key) ? real(key) : fallback; }

  std::int64_t integer(const std::string& key) const {
    const std::string& s = raw(key);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(key, "key '" + key + "': '" + s + "' is not an integer");
    }
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = raw(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError(key, "key '" + key + "': '" + s + "' is not a non-negative integer");
    }
    return v;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string& s = raw(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(key, "key '" + key + "': '" + s + "' is not a boolean");
  }

  // Wraps the library's string parsers so their errors name the key.
  template <class F>
  auto parsed(const std::string& key, F&& parse) const {
    try {
      return parse(raw(key));
    } catch (const InvalidArgument& e) {
      throw ConfigError(key, "key '" + key + "': " + e.what());
    }
  }

 private:
  const ConfigMap& cfg_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, "key '" + key + "': " + what);
}

int to_int(std::int64_t v, const std::string& key) {
  require(v >= std::numeric_limits<int>::min() && v <= std::numeric_limits<int>::max(), key,
          "value out of range");
  return static_cast<int>(v);
}

// Fills the estimator fields shared by `fit` and `simulate` on top of `cfg`.
void apply_fit_keys(const Reader& r, FitConfig& cfg, Index p, std::optional<DesignKind> design) {
  if (r.has("loss")) {
    const LossKind kind = r.parsed("loss", parse_loss_kind);
    if (design) {
      const bool logit = *design == DesignKind::Logit62;
      require(logit == (kind == LossKind::Logistic), "loss",
              std::string("loss does not match design '") + to_string(*design) + "'");
    }
    cfg.spec.kind = kind;
  }
  if (r.has("gamma")) {
    cfg.spec.gamma = r.real("gamma");
    require(cfg.spec.gamma > 0.0 && cfg.spec.gamma < 1.0, "gamma", "must lie in (0, 1)");
  }
  if (r.has("lambda")) {
    cfg.lambda = r.real("lambda");
    require(cfg.lambda > 0.0, "lambda", "must be > 0");
  }
  if (!r.has("mu") || r.raw("mu") == "auto") {
    cfg.scad.mu = default_mu(cfg.spec, p, cfg.lambda);
  } else {
    cfg.scad.mu = r.real("mu");
    require(cfg.scad.mu > 0.0, "mu", "must be > 0 or 'auto'");
  }
  cfg.scad.a = r.real("scad_a", cfg.scad.a);
  require(cfg.scad.a > 1.0, "scad_a", "must be > 1");

  cfg.grid.low = r.real("tau_low", cfg.grid.low);
  cfg.grid.high = r.real("tau_high", cfg.grid.high);
  require(cfg.grid.low < cfg.grid.high, "tau_high", "must exceed tau_low");
  if (r.has("grid_mode")) cfg.grid.mode.kind = r.parsed("grid_mode", parse_grid_kind);
  cfg.grid.mode.points = to_int(r.integer("grid_n", cfg.grid.mode.points), "grid_n");
  require(cfg.grid.mode.kind == GridKind::Observed || cfg.grid.mode.points >= 2, "grid_n",
          "must be >= 2");
  if (r.has("direction")) cfg.direction = r.parsed("direction", parse_direction);
  cfg.sweep.chunks = to_int(r.integer("grid_chunks", cfg.sweep.chunks), "grid_chunks");
  require(cfg.sweep.chunks >= 1, "grid_chunks", "must be >= 1");
  cfg.active_tol = r.real("active_tol", cfg.active_tol);
  require(cfg.active_tol >= 0.0, "active_tol", "must be >= 0");

  SolverOptions& s = cfg.solver;
  s.max_iter = to_int(r.integer("solver.max_iter", s.max_iter), "solver.max_iter");
  require(s.max_iter >= 1, "solver.max_iter", "must be >= 1");
  s.tol_primal = r.real("solver.tol_primal", s.tol_primal);
  require(s.tol_primal > 0.0, "solver.tol_primal", "must be > 0");
  s.tol_dual = r.real("solver.tol_dual", s.tol_dual);
  require(s.tol_dual > 0.0, "solver.tol_dual", "must be > 0");
  s.admm_rho = r.real("solver.admm_rho", s.admm_rho);
  require(s.admm_rho > 0.0, "solver.admm_rho", "must be > 0");
  s.admm_adaptive = r.flag("solver.admm_adaptive", s.admm_adaptive);
  s.cd_sweeps = to_int(r.integer("solver.cd_sweeps", s.cd_sweeps), "solver.cd_sweeps");
  require(s.cd_sweeps >= 1, "solver.cd_sweeps", "must be >= 1");
  s.fista_tol = r.real("solver.fista_tol", s.fista_tol);
  require(s.fista_tol > 0.0, "solver.fista_tol", "must be > 0");
  s.box_bound = r.real("solver.box_bound", s.box_bound);
  require(s.box_bound > 0.0, "solver.box_bound", "must be > 0");
}

void final_check(const FitConfig& cfg) {
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("", e.what());
  }
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "loss",         "gamma",           "lambda",           "mu",
      "scad_a",       "tau_low",         "tau_high",         "grid_mode",
      "grid_n",       "grid_chunks",     "direction",        "active_tol",
      "seed",         "replications",    "n",                "p",
      "design",       "tau0",            "ar_rho",           "no_change",
      "risk_method",  "n_val",           "solver.max_iter",  "solver.tol_primal",
      "solver.tol_dual", "solver.admm_rho", "solver.admm_adaptive", "solver.cd_sweeps",
      "solver.fista_tol", "solver.box_bound",
  };
  return keys;
}

ConfigMap parse_config_text(std::istream& in) {
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    auto [key, value] = split_pair(line, "line " + std::to_string(line_no));
    if (out.count(key)) throw ConfigError(key, "line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out.emplace(std::move(key), std::move(value));
  }
  return out;
}

ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read config file '" + path + "'");
  return parse_config_text(in);
}

void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    auto [key, value] = split_pair(o, "override");
    cfg[key] = std::move(value);
  }
}

FitConfig resolve_fit_config(const ConfigMap& cfg, Index p) {
  const Reader r(cfg);
  r.raw("loss");
  r.raw("lambda");
  FitConfig out;
  apply_fit_keys(r, out, p, std::nullopt);
  final_check(out);
  return out;
}

ExperimentConfig resolve_experiment_config(const ConfigMap& cfg) {
  const Reader r(cfg);
  const DesignKind design = r.parsed("design", parse_design);
  require(design != DesignKind::Custom, "design", "only median and logit can be simulated");
  const auto n = r.integer("n");
  require(n >= 10, "n", "must be >= 10");
  const auto p = r.integer("p");
  require(p >= 3, "p", "must be >= 3");
  const auto reps = r.integer("replications");
  require(reps >= 1, "replications", "must be >= 1");

  ExperimentConfig out = ExperimentConfig::table_design(design, static_cast<Index>(p));
  out.n = static_cast<Index>(n);
  out.replications = to_int(reps, "replications");
  out.master_seed = r.unsigned_integer("seed", out.master_seed);
  apply_fit_keys(r, out.fit, out.p, design);

  out.gen.tau0 = r.real("tau0", out.gen.tau0);
  require(out.gen.tau0 > 0.0 && out.gen.tau0 < 1.0, "tau0", "must lie in (0, 1)");
  out.gen.ar_rho = r.real("ar_rho", out.gen.ar_rho);
  require(std::abs(out.gen.ar_rho) < 1.0, "ar_rho", "must satisfy |ar_rho| < 1");
  out.gen.no_change = r.flag("no_change", out.gen.no_change);
  if (r.has("risk_method")) out.risk.method = r.parsed("risk_method", parse_risk_method);
  out.risk.n_val = static_cast<Index>(r.integer("n_val", out.risk.n_val));
  require(out.risk.n_val >= 1000, "n_val", "must be >= 1000");

  final_check(out.fit);
  return out;
}

}  // namespace threshold_sparse::cli
