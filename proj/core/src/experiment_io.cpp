#include "threshold_sparse/experiment_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("replications CSV: bad value '" + s + "' in column " + column);
  }
  return v;
}

std::uint64_t to_u64(const std::string& s, const std::string& column) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("replications CSV: bad integer '" + s + "' in column " + column);
  }
  return v;
}

bool to_bool(const std::string& s, const std::string& column) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw DataError("replications CSV: bad flag '" + s + "' in column " + column);
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_fixed(const std::optional<double>& v, int digits) {
  return v ? fixed(*v, digits) : "NA";
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

const std::vector<std::string>& replication_columns() {
  static const std::vector<std::string> cols = {
      "design",          "n",
      "p",               "replication",
      "seed",            "status",
      "excess_risk",     "n_active_total",
      "n_active_beta",   "n_active_delta",
      "covers_truth",    "target_hits",
      "l1_total",        "l1_on_J",
      "l1_on_Jc",        "tau_hat",
      "tau_tilde",       "tau_abs_err",
      "tau_tilde_abs_err", "delta_zero",
      "oracle1_excess_risk", "oracle1_l1",
      "oracle2_excess_risk", "oracle2_l1",
      "oracle2_tau_abs_err", "failure",
  };
  return cols;
}

void write_replications_csv(std::ostream& out, const ReplicationTable& table, bool header) {
  const auto& cols = replication_columns();
  if (header) {
    for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
    out << '\n';
  }
  for (const auto& r : table.records) {
    out << table.design << ',' << table.n << ',' << table.p << ',' << r.replication << ',' << r.seed
        << ',' << (r.failed ? "failed" : "ok") << ',';
    if (r.failed) {
      for (std::size_t k = 6; k + 1 < cols.size(); ++k) out << ',';
      out << sanitize(r.failure) << '\n';
      continue;
    }
    std::string hits;
    for (const bool h : r.target_hits) hits.push_back(h ? '1' : '0');
    out << format_double(r.excess_risk) << ',' << r.n_active_total << ',' << r.n_active_beta << ','
        << r.n_active_delta << ',' << (r.covers_truth ? 1 : 0) << ',' << (hits.empty() ? "-" : hits)
        << ',' << format_double(r.l1_total) << ',' << format_double(r.l1_on_J) << ','
        << format_double(r.l1_on_Jc) << ',' << format_double(r.tau_hat) << ','
        << format_double(r.tau_tilde) << ',' << format_double(r.tau_abs_err) << ','
        << format_double(r.tau_tilde_abs_err) << ',' << (r.delta_zero ? 1 : 0) << ','
        << format_double(r.oracle1_excess_risk) << ',' << format_double(r.oracle1_l1) << ','
        << format_double(r.oracle2_excess_risk) << ',' << format_double(r.oracle2_l1) << ','
        << format_double(r.oracle2_tau_abs_err) << ",\n";
  }
}

std::vector<ReplicationTable> read_replications_csv(std::istream& in) {
  const auto& cols = replication_columns();
  std::vector<ReplicationTable> tables;
  std::map<std::tuple<std::string, Index, Index>, std::size_t> index;
  std::string line;
  bool seen_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (!cells.empty() && cells[0] == "design") {
      if (cells != cols) throw DataError("replications CSV: header does not match the expected schema");
      seen_header = true;
      continue;
    }
    if (!seen_header) throw DataError("replications CSV: missing header row");
    if (cells.size() != cols.size()) {
      throw DataError("replications CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(cols.size()) + " fields, found " + std::to_string(cells.size()));
    }
    const auto n = static_cast<Index>(to_u64(cells[1], "n"));
    const auto p = static_cast<Index>(to_u64(cells[2], "p"));
    const auto key = std::make_tuple(cells[0], n, p);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, tables.size()).first;
      tables.push_back({cells[0], n, p, {}});
    }
    ReplicationRecord r;
    r.replication = to_u64(cells[3], "replication");
    r.seed = to_u64(cells[4], "seed");
    if (cells[5] == "failed") {
      r.failed = true;
      r.failure = cells[25];
    } else if (cells[5] == "ok") {
      r.excess_risk = to_double(cells[6], cols[6]);
      r.n_active_total = static_cast<int>(to_u64(cells[7], cols[7]));
      r.n_active_beta = static_cast<int>(to_u64(cells[8], cols[8]));
      r.n_active_delta = static_cast<int>(to_u64(cells[9], cols[9]));
      r.covers_truth = to_bool(cells[10], cols[10]);
      if (cells[11] != "-") {
        for (const char c : cells[11]) {
          if (c != '0' && c != '1') throw DataError("replications CSV: bad target_hits '" + cells[11] + "'");
          r.target_hits.push_back(c == '1');
        }
      }
      r.l1_total = to_double(cells[12], cols[12]);
      r.l1_on_J = to_double(cells[13], cols[13]);
      r.l1_on_Jc = to_double(cells[14], cols[14]);
      r.tau_hat = to_double(cells[15], cols[15]);
      r.tau_tilde = to_double(cells[16], cols[16]);
      r.tau_abs_err = to_double(cells[17], cols[17]);
      r.tau_tilde_abs_err = to_double(cells[18], cols[18]);
      r.delta_zero = to_bool(cells[19], cols[19]);
      r.oracle1_excess_risk = to_double(cells[20], cols[20]);
      r.oracle1_l1 = to_double(cells[21], cols[21]);
      r.oracle2_excess_risk = to_double(cells[22], cols[22]);
      r.oracle2_l1 = to_double(cells[23], cols[23]);
      r.oracle2_tau_abs_err = to_double(cells[24], cols[24]);
    } else {
      throw DataError("replications CSV: bad status '" + cells[5] + "'");
    }
    tables[it->second].records.push_back(std::move(r));
  }
  if (tables.empty()) throw DataError("replications CSV contains no records");
  return tables;
}

void write_timings_csv(std::ostream& out, const std::vector<ReplicationRecord>& records) {
  out << "replication,runtime_ms\n";
  for (const auto& r : records) out << r.replication << ',' << r.runtime_ms << '\n';
}

void write_summary_markdown(std::ostream& out, const std::vector<ExperimentSummary>& summaries) {
  std::string current;
  for (const auto& s : summaries) {
    if (s.design != current) {
      if (!current.empty()) out << '\n';
      current = s.design;
      out << "### " << s.design << " (n=" << s.n << ")\n\n"
          << "| Design | Excess risk mean | Excess risk median | E[J(a)] (beta / delta) "
             "| P{J(a0) in J(a)} (targets) | E|a-a0|_1 (on J / on J^c) | E|tau-tau0| |\n"
          << "|---|---|---|---|---|---|---|\n";
    }
    const auto row = [&](const SummaryRow& r, const std::string& label) {
      out << "| " << label << " | " << fixed(r.mean_excess_risk, 3) << " | "
          << fixed(r.median_excess_risk, 3) << " | ";
      if (r.mean_active_total) {
        out << fixed(*r.mean_active_total, 2) << " ( " << fixed(*r.mean_active_beta, 1) << " / "
            << fixed(*r.mean_active_delta, 1) << " )";
      } else {
        out << "NA";
      }
      out << " | ";
      if (r.coverage) {
        out << fixed(*r.coverage, 2) << " (";
        for (std::size_t k = 0; k < r.target_coverage.size(); ++k) {
          out << (k ? " / " : " ") << fixed(r.target_coverage[k], 2);
        }
        out << " )";
      } else {
        out << "NA";
      }
      out << " | " << fixed(r.mean_l1, 3) << " ( " << fixed(r.mean_l1_on_J, 3) << " / "
          << opt_fixed(r.mean_l1_on_Jc, 3) << " ) | " << opt_fixed(r.mean_tau_err, 3) << " |\n";
    };
    const std::string suffix = " (p=" + std::to_string(s.p) + ")";
    row(s.oracle1, s.oracle1.label + suffix);
    row(s.oracle2, s.oracle2.label + suffix);
    row(s.estimator, s.estimator.label);
  }
  if (!summaries.empty()) {
    const auto& s = summaries.back();
    out << "\nReplications completed: " << s.completed << ", failed: " << s.failures
        << ". Threshold error column uses the first-step tau; mean |tau_tilde - tau0| = "
        << opt_fixed(s.estimator.mean_tau_tilde_err, 4) << ".\n";
  }
}

void write_summary_csv(std::ostream& out, const std::vector<ExperimentSummary>& summaries) {
  out << "design,n,p,row,completed,failures,mean_excess_risk,median_excess_risk,mean_active_total,"
         "mean_active_beta,mean_active_delta,coverage,target_coverage,mean_l1,mean_l1_on_J,"
         "mean_l1_on_Jc,mean_tau_err,mean_tau_tilde_err,frac_delta_zero\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : "NA"; };
  for (const auto& s : summaries) {
    for (const SummaryRow* r : {&s.oracle1, &s.oracle2, &s.estimator}) {
      std::string targets;
      for (std::size_t k = 0; k < r->target_coverage.size(); ++k) {
        targets += (k ? ";" : "") + format_double(r->target_coverage[k]);
      }
      out << s.design << ',' << s.n << ',' << s.p << ',' << r->label << ',' << s.completed << ','
          << s.failures << ',' << format_double(r->mean_excess_risk) << ','
          << format_double(r->median_excess_risk) << ',' << opt(r->mean_active_total) << ','
          << opt(r->mean_active_beta) << ',' << opt(r->mean_active_delta) << ',' << opt(r->coverage)
          << ',' << (targets.empty() ? "NA" : targets) << ',' << format_double(r->mean_l1) << ','
          << format_double(r->mean_l1_on_J) << ',' << opt(r->mean_l1_on_Jc) << ','
          << opt(r->mean_tau_err) << ',' << opt(r->mean_tau_tilde_err) << ','
          << opt(r->frac_delta_zero) << '\n';
    }
  }
}

}  // namespace threshold_sparse
