#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace threshold_sparse {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

inline constexpr double kDefaultActiveTol = 1e-8;

/// Raw sample (Y, X, Q). Immutable once constructed; construction validates
/// shapes and rejects non-finite entries.
class Dataset {
 public:
  Dataset(Vector y, Matrix x, Vector q, std::vector<std::string> feature_names = {});

  Index n() const noexcept { return y_.size(); }
  Index p() const noexcept { return x_.cols(); }

  const Vector& y() const noexcept { return y_; }
  const Matrix& x() const noexcept { return x_; }
  const Vector& q() const noexcept { return q_; }

  /// Names of the p regressors; defaults to x1..xp.
  const std::vector<std::string>& feature_names() const noexcept { return names_; }

 private:
  Vector y_;
  Matrix x_;
  Vector q_;
  std::vector<std::string> names_;
};

/// Reads a dataset from CSV: header row with a `y` column, a `q` column and
/// the regressors in file order. Throws DataError naming the problem.
Dataset load_dataset_csv(const std::string& path);
Dataset parse_dataset_csv(std::istream& in);

enum class IndicatorDirection : std::uint8_t {
  Greater,  ///< regime indicator 1{q > tau}
  Less,     ///< regime indicator 1{q < tau}
};

const char* to_string(IndicatorDirection d) noexcept;
IndicatorDirection parse_direction(const std::string& s);

/// Regime indicator for a single observation. Strict in both conventions.
inline bool in_regime(double q, double tau, IndicatorDirection d) noexcept {
  return d == IndicatorDirection::Greater ? q > tau : q < tau;
}

/// The 2p-wide design (X, X * 1{regime}) at a fixed tau. Holds a reference to
/// the dataset (which must outlive it) plus the precomputed regime mask.
class ThresholdDesign {
 public:
  ThresholdDesign(const Dataset& data, double tau, IndicatorDirection direction);

  const Dataset& dataset() const noexcept { return *data_; }
  double tau() const noexcept { return tau_; }
  IndicatorDirection direction() const noexcept { return direction_; }
  const Mask& regime_mask() const noexcept { return mask_; }
  /// Mask as 0/1 doubles.
  const Eigen::ArrayXd& indicator() const noexcept { return indicator_; }

  Index n() const noexcept { return data_->n(); }
  Index p() const noexcept { return data_->p(); }
  Index width() const noexcept { return 2 * data_->p(); }

  /// Dense n x 2p copy of the augmented design.
  Matrix materialize() const;

 private:
  const Dataset* data_;
  double tau_;
  IndicatorDirection direction_;
  Mask mask_;
  Eigen::ArrayXd indicator_;
};

ThresholdDesign build_threshold_design(const Dataset& data, double tau,
                                       IndicatorDirection direction);

/// alpha = (beta, delta), theta = beta + delta.
struct CoefficientPair {
  Vector beta;
  Vector delta;

  static CoefficientPair zeros(Index p);
  /// Splits a 2p vector into its two halves.
  static CoefficientPair from_alpha(const Eigen::Ref<const Vector>& alpha);

  Index p() const noexcept { return beta.size(); }
  Vector theta() const { return beta + delta; }
  Vector as_alpha() const;

  bool operator==(const CoefficientPair& o) const {
    return beta.size() == o.beta.size() && delta.size() == o.delta.size() &&
           beta == o.beta && delta == o.delta;
  }
};

/// Rewrites coefficients stated under one indicator convention into the other:
/// (beta, delta) -> (beta + delta, -delta). Predictions agree wherever q != tau.
CoefficientPair flip_direction(const CoefficientPair& c);

/// x_i'beta + x_i'delta * mask_i for every observation.
Vector linear_predictor(const ThresholdDesign& design, const CoefficientPair& alpha);

/// Indices (0-based, into the 2p vector) of entries with |v_j| > tolerance.
struct ActiveSet {
  std::vector<Index> indices;
  double tolerance = kDefaultActiveTol;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
  bool contains(Index j) const;
  /// True when every index of `other` is also in this set.
  bool includes(const ActiveSet& other) const;
  /// Number of indices below `p` (beta block) and at or above it (delta block).
  std::size_t count_below(Index p) const;
};

ActiveSet active_set(const Eigen::Ref<const Vector>& v, double tol = kDefaultActiveTol);

}  // namespace threshold_sparse
