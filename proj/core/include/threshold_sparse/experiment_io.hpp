#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "threshold_sparse/simulation.hpp"

namespace threshold_sparse {

/// Replication records of one (design, n, p) cell.
struct ReplicationTable {
  std::string design;
  Index n = 0;
  Index p = 0;
  std::vector<ReplicationRecord> records;
};

/// Column names of replications.csv, in order.
const std::vector<std::string>& replication_columns();

/// One row per replication. Doubles use the shortest round-trip form, so a
/// file read back re-aggregates to bit-identical summaries. Wall-clock time
/// is not part of this file (see write_timings_csv).
void write_replications_csv(std::ostream& out, const ReplicationTable& table, bool header = true);

/// Parses one or more concatenated tables. Rows are grouped by (design, n, p)
/// in order of first appearance. Throws DataError on a schema mismatch.
std::vector<ReplicationTable> read_replications_csv(std::istream& in);

void write_timings_csv(std::ostream& out, const std::vector<ReplicationRecord>& records);

/// Table-1-shaped Markdown: oracle rows followed by the estimator row for
/// every summary, one table per design.
void write_summary_markdown(std::ostream& out, const std::vector<ExperimentSummary>& summaries);

void write_summary_csv(std::ostream& out, const std::vector<ExperimentSummary>& summaries);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace threshold_sparse
