#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "threshold_sparse/experiment_io.hpp"
#include "threshold_sparse_cli/commands.hpp"

using namespace threshold_sparse;
using namespace threshold_sparse::cli;
namespace fs = std::filesystem;

namespace {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("threshold_sparse_cli_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

void write_dataset(const fs::path& p, const Dataset& d, bool with_q = true) {
  std::ofstream f(p);
  f.precision(17);
  f << "y";
  if (with_q) f << ",q";
  for (const auto& nm : d.feature_names()) f << ',' << nm;
  f << '\n';
  for (Index i = 0; i < d.n(); ++i) {
    f << d.y()(i);
    if (with_q) f << ',' << d.q()(i);
    for (Index j = 0; j < d.p(); ++j) f << ',' << d.x()(i, j);
    f << '\n';
  }
}

const char* kFitConfig =
    "loss = quantile\nlambda = 0.05\ngrid_n = 11\ndirection = greater\n";
const char* kSimConfig =
    "design = median\nn = 120\np = 5\nreplications = 5\ngrid_n = 11\nn_val = 5000\nseed = 4242\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fit writes its outputs") {
    TempDir dir("fit");
    std::mt19937_64 rng(11);
    write_dataset(dir / "data.csv", fixtures::random_dataset(rng, 150, 4, false));
    write_text(dir / "fit.cfg", kFitConfig);

    CommandOptions opts;
    opts.config_path = (dir / "fit.cfg").string();
    opts.output_dir = (dir / "out").string();
    opts.threads = 1;
    std::ostringstream out, err;
    REQUIRE(cmd_fit((dir / "data.csv").string(), opts, out, err) == kExitOk);
    CHECK(err.str().empty());
    CHECK(out.str().find("tau_hat=") != std::string::npos);

    const std::string json = slurp(dir / "out" / "fit.json");
    CHECK(json.find("\"tau_tilde\"") != std::string::npos);
    CHECK(json.find("\"x2\"") != std::string::npos);
    const std::string profile = slurp(dir / "out" / "profile.csv");
    CHECK(profile.rfind("tau,objective,converged,kkt_violation,iterations,n_active\n", 0) == 0);
    CHECK(std::count(profile.begin(), profile.end(), '\n') == 12);
  }

  TEST_CASE("fit rejects a dataset without q and names the column") {
    TempDir dir("noq");
    std::mt19937_64 rng(12);
    write_dataset(dir / "data.csv", fixtures::random_dataset(rng, 50, 3, false), false);
    write_text(dir / "fit.cfg", kFitConfig);
    CommandOptions opts;
    opts.config_path = (dir / "fit.cfg").string();
    opts.output_dir = (dir / "out").string();
    std::ostringstream out, err;
    CHECK(cmd_fit((dir / "data.csv").string(), opts, out, err) == kExitBadInput);
    CHECK(err.str().find("'q'") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
  }

  TEST_CASE("fit with a bad lambda writes nothing") {
    TempDir dir("badlambda");
    std::mt19937_64 rng(13);
    write_dataset(dir / "data.csv", fixtures::random_dataset(rng, 50, 3, false));
    write_text(dir / "fit.cfg", kFitConfig);
    CommandOptions opts;
    opts.config_path = (dir / "fit.cfg").string();
    opts.overrides = {"lambda=-1"};
    opts.output_dir = (dir / "out").string();
    std::ostringstream out, err;
    CHECK(cmd_fit((dir / "data.csv").string(), opts, out, err) == kExitBadInput);
    CHECK(err.str().find("lambda") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
  }

  TEST_CASE("missing config file is a bad-input error") {
    CommandOptions opts;
    opts.config_path = "/nonexistent/threshold_sparse.cfg";
    std::ostringstream out, err;
    CHECK(cmd_simulate(opts, out, err) == kExitBadInput);
  }

  TEST_CASE("simulate is deterministic and thread-count independent") {
    TempDir dir("sim");
    write_text(dir / "sim.cfg", kSimConfig);
    CommandOptions opts;
    opts.config_path = (dir / "sim.cfg").string();
    std::ostringstream out, err;

    opts.output_dir = (dir / "a").string();
    opts.threads = 1;
    REQUIRE(cmd_simulate(opts, out, err) == kExitOk);
    opts.output_dir = (dir / "b").string();
    opts.threads = 8;
    REQUIRE(cmd_simulate(opts, out, err) == kExitOk);

    for (const char* f : {"replications.csv", "summary.md", "summary.csv"}) {
      CAPTURE(f);
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(fs::exists(dir / "a" / "timings.csv"));
    CHECK(out.str().find("Oracle 1") != std::string::npos);
  }

  TEST_CASE("simulate rejects zero replications") {
    TempDir dir("simbad");
    write_text(dir / "sim.cfg", kSimConfig);
    CommandOptions opts;
    opts.config_path = (dir / "sim.cfg").string();
    opts.overrides = {"replications=0"};
    opts.output_dir = (dir / "out").string();
    std::ostringstream out, err;
    CHECK(cmd_simulate(opts, out, err) == kExitBadInput);
    CHECK(err.str().find("replications") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "out"));
  }

  TEST_CASE("report reproduces the simulate summary") {
    TempDir dir("report");
    write_text(dir / "sim.cfg", kSimConfig);
    CommandOptions opts;
    opts.config_path = (dir / "sim.cfg").string();
    opts.output_dir = (dir / "sim").string();
    opts.threads = 1;
    std::ostringstream out, err;
    REQUIRE(cmd_simulate(opts, out, err) == kExitOk);

    CommandOptions ropts;
    ropts.output_dir = (dir / "rep").string();
    REQUIRE(cmd_report({(dir / "sim" / "replications.csv").string()}, "", ropts, out, err) == kExitOk);
    CHECK(slurp(dir / "sim" / "summary.csv") == slurp(dir / "rep" / "summary.csv"));
    CHECK(slurp(dir / "sim" / "summary.md") == slurp(dir / "rep" / "summary.md"));
  }

  TEST_CASE("report rejects an empty CSV") {
    TempDir dir("empty");
    write_text(dir / "empty.csv", "");
    CommandOptions opts;
    opts.output_dir = (dir / "out").string();
    std::ostringstream out, err;
    CHECK(cmd_report({(dir / "empty.csv").string()}, "", opts, out, err) == kExitBadInput);
    CHECK(cmd_report({}, "", opts, out, err) == kExitBadInput);
  }

  TEST_CASE("report converts a fit profile") {
    TempDir dir("profile");
    write_text(dir / "profile.csv", "tau,objective,converged,kkt_violation,iterations,n_active\n0.2,1.5,1,0,10,3\n");
    CommandOptions opts;
    opts.output_dir = (dir / "out").string();
    std::ostringstream out, err;
    REQUIRE(cmd_report({}, (dir / "profile.csv").string(), opts, out, err) == kExitOk);
    CHECK(slurp(dir / "out" / "profile.dat") == "# tau objective converged\n0.2 1.5 1\n");
  }

  TEST_CASE("thread resolution") {
    CHECK(resolve_threads(3) == 3);
    CHECK(resolve_threads(0) >= 1);
  }
}
