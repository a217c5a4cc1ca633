#include "threshold_sparse/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "threshold_sparse/errors.hpp"

namespace threshold_sparse {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_cell(std::string_view cell, std::size_t line_no, const std::string& column) {
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc{} || ptr != last) {
    throw DataError("line " + std::to_string(line_no) + ", column '" + column +
                    "': cannot parse '" + std::string(cell) + "' as a number");
  }
  return value;
}

}  // namespace

Dataset::Dataset(Vector y, Matrix x, Vector q, std::vector<std::string> feature_names)
    : y_(std::move(y)), x_(std::move(x)), q_(std::move(q)), names_(std::move(feature_names)) {
  if (y_.size() < 1) throw DataError("dataset needs at least one observation");
  if (x_.cols() < 1) throw DataError("dataset needs at least one regressor");
  if (x_.rows() != y_.size() || q_.size() != y_.size()) {
    throw DataError("dataset size mismatch: y has " + std::to_string(y_.size()) + ", x has " +
                    std::to_string(x_.rows()) + " rows, q has " + std::to_string(q_.size()));
  }
  if (!y_.allFinite()) throw DataError("non-finite value in y");
  if (!q_.allFinite()) throw DataError("non-finite value in q");
  if (!x_.allFinite()) throw DataError("non-finite value in x");
  if (names_.empty()) {
    names_.reserve(static_cast<std::size_t>(x_.cols()));
    for (Index j = 0; j < x_.cols(); ++j) names_.push_back("x" + std::to_string(j + 1));
  } else if (static_cast<Index>(names_.size()) != x_.cols()) {
    throw DataError("feature_names has " + std::to_string(names_.size()) + " entries, expected " +
                    std::to_string(x_.cols()));
  }
}

Dataset parse_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError("empty CSV: no header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }

  const auto header = split_commas(line);
  std::vector<std::string> columns(header.begin(), header.end());
  const auto find_col = [&](const std::string& name) -> std::ptrdiff_t {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw DataError("CSV header is missing required column '" + name + "'");
    if (std::find(std::next(it), columns.end(), name) != columns.end()) {
      throw DataError("CSV header has duplicate column '" + name + "'");
    }
    return it - columns.begin();
  };
  const auto y_col = find_col("y");
  const auto q_col = find_col("q");
  std::vector<std::ptrdiff_t> x_cols;
  std::vector<std::string> names;
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(columns.size()); ++c) {
    if (c == y_col || c == q_col) continue;
    x_cols.push_back(c);
    names.push_back(columns[static_cast<std::size_t>(c)]);
  }
  if (x_cols.empty()) throw DataError("CSV has no regressor columns besides 'y' and 'q'");

  std::vector<double> ys, qs, xs;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != columns.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(columns.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    ys.push_back(parse_cell(cells[static_cast<std::size_t>(y_col)], line_no, "y"));
    qs.push_back(parse_cell(cells[static_cast<std::size_t>(q_col)], line_no, "q"));
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      xs.push_back(parse_cell(cells[static_cast<std::size_t>(x_cols[k])], line_no, names[k]));
    }
  }
  if (ys.empty()) throw DataError("CSV has a header but no data rows");

  const auto n = static_cast<Index>(ys.size());
  const auto p = static_cast<Index>(x_cols.size());
  // xs is row-major n x p
  Matrix x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      xs.data(), n, p);
  return Dataset(Eigen::Map<const Vector>(ys.data(), n), std::move(x),
                 Eigen::Map<const Vector>(qs.data(), n), std::move(names));
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_dataset_csv(in);
}

const char* to_string(IndicatorDirection d) noexcept {
  return d == IndicatorDirection::Greater ? "greater" : "less";
}

IndicatorDirection parse_direction(const std::string& s) {
  if (s == "greater" || s == "gt" || s == ">") return IndicatorDirection::Greater;
  if (s == "less" || s == "lt" || s == "<") return IndicatorDirection::Less;
  throw InvalidArgument("unknown indicator direction '" + s + "' (expected greater|less)");
}

ThresholdDesign::ThresholdDesign(const Dataset& data, double tau, IndicatorDirection direction)
    : data_(&data), tau_(tau), direction_(direction) {
  if (!std::isfinite(tau)) throw InvalidArgument("threshold tau must be finite");
  const auto& q = data.q();
  mask_.resize(q.size());
  for (Index i = 0; i < q.size(); ++i) mask_(i) = in_regime(q(i), tau, direction);
  indicator_ = mask_.cast<double>();
}

Matrix ThresholdDesign::materialize() const {
  const Index p = data_->p();
  Matrix out(n(), 2 * p);
  out.leftCols(p) = data_->x();
  out.rightCols(p) = (data_->x().array().colwise() * indicator_).matrix();
  return out;
}

ThresholdDesign build_threshold_design(const Dataset& data, double tau,
                                       IndicatorDirection direction) {
  return ThresholdDesign(data, tau, direction);
}

CoefficientPair CoefficientPair::zeros(Index p) {
  return {Vector::Zero(p), Vector::Zero(p)};
}

CoefficientPair CoefficientPair::from_alpha(const Eigen::Ref<const Vector>& alpha) {
  if (alpha.size() % 2 != 0) {
    throw InvalidArgument("alpha must have even length, got " + std::to_string(alpha.size()));
  }
  const Index p = alpha.size() / 2;
  return {alpha.head(p), alpha.tail(p)};
}

Vector CoefficientPair::as_alpha() const {
  Vector out(beta.size() + delta.size());
  out << beta, delta;
  return out;
}

CoefficientPair flip_direction(const CoefficientPair& c) {
  return {c.beta + c.delta, -c.delta};
}

Vector linear_predictor(const ThresholdDesign& design, const CoefficientPair& alpha) {
  if (alpha.beta.size() != design.p() || alpha.delta.size() != design.p()) {
    throw InvalidArgument("coefficient length " + std::to_string(alpha.beta.size()) + "/" +
                          std::to_string(alpha.delta.size()) + " does not match p=" +
                          std::to_string(design.p()));
  }
  const auto& x = design.dataset().x();
  Vector out = x * alpha.beta;
  out.array() += (x * alpha.delta).array() * design.indicator();
  return out;
}

bool ActiveSet::contains(Index j) const {
  return std::binary_search(indices.begin(), indices.end(), j);
}

bool ActiveSet::includes(const ActiveSet& other) const {
  return std::includes(indices.begin(), indices.end(), other.indices.begin(), other.indices.end());
}

std::size_t ActiveSet::count_below(Index p) const {
  return static_cast<std::size_t>(std::lower_bound(indices.begin(), indices.end(), p) - indices.begin());
}

ActiveSet active_set(const Eigen::Ref<const Vector>& v, double tol) {
  if (!(tol >= 0.0)) throw InvalidArgument("active-set tolerance must be >= 0");
  ActiveSet out;
  out.tolerance = tol;
  for (Index j = 0; j < v.size(); ++j) {
    if (std::abs(v(j)) > tol) out.indices.push_back(j);
  }
  return out;
}

}  // namespace threshold_sparse
