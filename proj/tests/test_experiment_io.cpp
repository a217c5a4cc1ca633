#include <random>
#include <sstream>

#include "doctest.h"
#include "threshold_sparse/errors.hpp"
#include "threshold_sparse/experiment_io.hpp"

using namespace threshold_sparse;

namespace {

ReplicationRecord random_record(std::mt19937_64& rng, std::uint64_t r) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> k(0, 8);
  ReplicationRecord rec;
  rec.replication = r;
  rec.seed = split_seed(1, r);
  rec.excess_risk = u(rng) / 37.0;
  rec.n_active_beta = k(rng);
  rec.n_active_delta = k(rng);
  rec.n_active_total = rec.n_active_beta + rec.n_active_delta;
  rec.covers_truth = u(rng) < 0.8;
  rec.target_hits = {true, u(rng) < 0.5, true, u(rng) < 0.9};
  rec.l1_on_J = u(rng);
  rec.l1_on_Jc = u(rng) / 3.0;
  rec.l1_total = rec.l1_on_J + rec.l1_on_Jc;
  rec.tau_hat = 0.5 + (u(rng) - 0.5) / 10.0;
  rec.tau_tilde = rec.tau_hat;
  rec.tau_abs_err = std::abs(rec.tau_hat - 0.5);
  rec.tau_tilde_abs_err = rec.tau_abs_err;
  rec.delta_zero = u(rng) < 0.1;
  rec.oracle1_excess_risk = u(rng) / 100.0;
  rec.oracle1_l1 = u(rng);
  rec.oracle2_excess_risk = u(rng) / 90.0;
  rec.oracle2_l1 = u(rng);
  rec.oracle2_tau_abs_err = u(rng) / 100.0;
  rec.runtime_ms = 1234;
  return rec;
}

ReplicationTable random_table(std::uint64_t seed, int rows, std::uint64_t first = 0) {
  std::mt19937_64 rng(seed);
  ReplicationTable t{"median", 400, 50, {}};
  for (int r = 0; r < rows; ++r) t.records.push_back(random_record(rng, first + r));
  ReplicationRecord failed;
  failed.replication = first + rows;
  failed.failed = true;
  failed.failure = "no converged point, on the grid";
  t.records.push_back(failed);
  return t;
}

}  // namespace

TEST_SUITE("experiment_io") {
  TEST_CASE("replication rows round trip exactly") {
    const ReplicationTable t = random_table(1, 25);
    std::stringstream ss;
    write_replications_csv(ss, t);
    const auto back = read_replications_csv(ss);
    REQUIRE(back.size() == 1);
    CHECK(back[0].design == "median");
    CHECK(back[0].n == 400);
    REQUIRE(back[0].records.size() == t.records.size());
    for (std::size_t k = 0; k < t.records.size(); ++k) {
      const auto& a = t.records[k];
      const auto& b = back[0].records[k];
      CHECK(a.failed == b.failed);
      CHECK(a.seed == b.seed);
      CHECK(a.excess_risk == b.excess_risk);
      CHECK(a.l1_on_Jc == b.l1_on_Jc);
      CHECK(a.target_hits == b.target_hits);
      CHECK(a.oracle2_tau_abs_err == b.oracle2_tau_abs_err);
    }
    const auto s1 = summarize("median", 400, 50, t.records);
    const auto s2 = summarize("median", 400, 50, back[0].records);
    CHECK(s1.estimator.mean_excess_risk == s2.estimator.mean_excess_risk);
    CHECK(*s1.estimator.coverage == *s2.estimator.coverage);
    CHECK(s1.failures == 1);
    CHECK(s2.failures == 1);
  }

  TEST_CASE("pooled means are weighted means of the parts") {
    const ReplicationTable a = random_table(2, 10, 0);
    const ReplicationTable b = random_table(3, 30, 100);
    std::stringstream ss;
    write_replications_csv(ss, a);
    write_replications_csv(ss, b, false);
    const auto back = read_replications_csv(ss);
    REQUIRE(back.size() == 1);
    const auto pooled = summarize("median", 400, 50, back[0].records);
    const auto sa = summarize("median", 400, 50, a.records);
    const auto sb = summarize("median", 400, 50, b.records);
    const double w = (10.0 * sa.estimator.mean_excess_risk + 30.0 * sb.estimator.mean_excess_risk) / 40.0;
    CHECK(std::abs(pooled.estimator.mean_excess_risk - w) <= 1e-12);
    const double wl = (10.0 * sa.estimator.mean_l1 + 30.0 * sb.estimator.mean_l1) / 40.0;
    CHECK(std::abs(pooled.estimator.mean_l1 - wl) <= 1e-12);
  }

  TEST_CASE("different cells stay separate") {
    ReplicationTable a = random_table(4, 3);
    ReplicationTable b = random_table(5, 3);
    b.p = 100;
    std::stringstream ss;
    write_replications_csv(ss, a);
    write_replications_csv(ss, b, false);
    const auto back = read_replications_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[1].p == 100);
  }

  TEST_CASE("runtime stays out of the replication file") {
    std::stringstream ss;
    write_replications_csv(ss, random_table(6, 2));
    CHECK(ss.str().find("1234") == std::string::npos);
    std::stringstream tm;
    write_timings_csv(tm, random_table(6, 2).records);
    CHECK(tm.str().find("1234") != std::string::npos);
  }

  TEST_CASE("malformed input is a data error") {
    std::stringstream empty;
    CHECK_THROWS_AS(read_replications_csv(empty), DataError);
    std::stringstream header_only;
    write_replications_csv(header_only, ReplicationTable{"median", 1, 3, {}});
    CHECK_THROWS_AS(read_replications_csv(header_only), DataError);
    std::stringstream wrong("design,n,p\nmedian,1,2\n");
    CHECK_THROWS_AS(read_replications_csv(wrong), DataError);
  }

  TEST_CASE("summary tables") {
    const auto s = summarize("median", 400, 50, random_table(7, 5).records);
    std::stringstream md, csv;
    write_summary_markdown(md, {s});
    write_summary_csv(csv, {s});
    CHECK(md.str().find("Oracle 1") != std::string::npos);
    CHECK(md.str().find("p=50") != std::string::npos);
    CHECK(md.str().find("NA") != std::string::npos);
    CHECK(csv.str().find(",Oracle 2,") != std::string::npos);
    CHECK(csv.str().find(",p=50,") != std::string::npos);
  }

  TEST_CASE("shortest round-trip doubles") {
    for (const double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
  }
}
