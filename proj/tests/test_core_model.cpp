#include <sstream>

#include "doctest.h"
#include "threshold_sparse/core_model.hpp"
#include "threshold_sparse/errors.hpp"
#include "threshold_sparse/simulation.hpp"

using namespace threshold_sparse;

namespace {

Dataset four_points() {
  Vector y(4);
  y << 1, 2, 3, 4;
  Matrix x(4, 2);
  x << 1, 2, 1, 0, 1, -1, 1, 3;
  Vector q(4);
  q << 0.1, 0.2, 0.8, 0.9;
  return Dataset(y, x, q);
}

}  // namespace

TEST_SUITE("core_model") {
  TEST_CASE("dataset validates shapes and finiteness") {
    Vector y = Vector::Ones(3);
    Matrix x = Matrix::Ones(3, 2);
    Vector q = Vector::Zero(3);
    CHECK_NOTHROW(Dataset(y, x, q));
    CHECK_THROWS_AS(Dataset(Vector::Ones(2), x, q), DataError);
    CHECK_THROWS_AS(Dataset(y, x, Vector::Zero(4)), DataError);
    CHECK_THROWS_AS(Dataset(Vector(), Matrix(0, 2), Vector()), DataError);
    Matrix bad = x;
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Dataset(y, bad, q), DataError);
    Vector qinf = q;
    qinf(0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(Dataset(y, x, qinf), DataError);

    const Dataset d(y, x, q);
    REQUIRE(d.feature_names().size() == 2);
    CHECK(d.feature_names()[0] == "x1");
    CHECK(d.feature_names()[1] == "x2");
  }

  TEST_CASE("csv parsing finds y and q anywhere in the header") {
    std::istringstream in("a,q,y,b\n1,0.5,2,3\n4,0.25,5,6\n");
    const Dataset d = parse_dataset_csv(in);
    CHECK(d.n() == 2);
    CHECK(d.p() == 2);
    CHECK(d.feature_names() == std::vector<std::string>{"a", "b"});
    CHECK(d.y()(1) == 5.0);
    CHECK(d.q()(0) == 0.5);
    CHECK(d.x()(1, 1) == 6.0);
  }

  TEST_CASE("csv missing q names the column") {
    std::istringstream in("y,x1\n1,2\n");
    try {
      parse_dataset_csv(in);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("'q'") != std::string::npos);
    }
  }

  TEST_CASE("csv rejects ragged rows and unparseable cells") {
    std::istringstream ragged("y,q,x1\n1,2\n");
    CHECK_THROWS_AS(parse_dataset_csv(ragged), DataError);
    std::istringstream junk("y,q,x1\n1,2,abc\n");
    CHECK_THROWS_AS(parse_dataset_csv(junk), DataError);
    std::istringstream empty("");
    CHECK_THROWS_AS(parse_dataset_csv(empty), DataError);
  }

  TEST_CASE("regime mask in both conventions") {
    const Dataset d = four_points();
    const auto g = build_threshold_design(d, 0.5, IndicatorDirection::Greater);
    CHECK((g.regime_mask() == Mask((Mask(4) << false, false, true, true).finished())).all());
    const auto l = build_threshold_design(d, 0.5, IndicatorDirection::Less);
    CHECK((l.regime_mask() == Mask((Mask(4) << true, true, false, false).finished())).all());
    const auto below = build_threshold_design(d, 0.0, IndicatorDirection::Greater);
    CHECK(below.regime_mask().all());
  }

  TEST_CASE("ties go to the non-regime side in both conventions") {
    const Dataset d = four_points();
    const auto g = build_threshold_design(d, 0.2, IndicatorDirection::Greater);
    const auto l = build_threshold_design(d, 0.2, IndicatorDirection::Less);
    CHECK_FALSE(g.regime_mask()(1));
    CHECK_FALSE(l.regime_mask()(1));
  }

  TEST_CASE("non-finite tau is rejected") {
    const Dataset d = four_points();
    CHECK_THROWS_AS(build_threshold_design(d, std::nan(""), IndicatorDirection::Greater),
                    InvalidArgument);
  }

  TEST_CASE("materialized design has the augmented columns") {
    const Dataset d = four_points();
    const auto g = build_threshold_design(d, 0.5, IndicatorDirection::Greater);
    const Matrix m = g.materialize();
    REQUIRE(m.cols() == 4);
    CHECK(m.leftCols(2) == d.x());
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 2; ++j) CHECK(m(i, 2 + j) == (g.regime_mask()(i) ? d.x()(i, j) : 0.0));
  }

  TEST_CASE("linear predictor by hand") {
    Matrix x(1, 2);
    x << 1, 2;
    const Dataset d(Vector::Zero(1), x, Vector::Constant(1, 1.0));
    const auto g = build_threshold_design(d, 0.5, IndicatorDirection::Greater);
    CoefficientPair a{(Vector(2) << 1, 0).finished(), (Vector(2) << 0, 1).finished()};
    CHECK(linear_predictor(g, a)(0) == doctest::Approx(3.0));
  }

  TEST_CASE("linear predictor special cases") {
    const Dataset d = four_points();
    CoefficientPair a{(Vector(2) << 0.5, -1).finished(), Vector::Zero(2)};
    for (double tau : {0.0, 0.15, 0.5, 0.95}) {
      const auto g = build_threshold_design(d, tau, IndicatorDirection::Greater);
      CHECK((linear_predictor(g, a) - d.x() * a.beta).norm() == 0.0);
    }
    a.delta << 2, 3;
    const auto all = build_threshold_design(d, -1.0, IndicatorDirection::Greater);
    CHECK((linear_predictor(all, a) - d.x() * a.theta()).norm() < 1e-15);
    CoefficientPair wrong{Vector::Zero(3), Vector::Zero(3)};
    CHECK_THROWS_AS(linear_predictor(all, wrong), InvalidArgument);
  }

  TEST_CASE("coefficient pair round trip") {
    Vector alpha(6);
    alpha << 1, -2, 3, 0.5, 0, -7;
    const auto c = CoefficientPair::from_alpha(alpha);
    CHECK(c.beta == alpha.head(3));
    CHECK(c.delta == alpha.tail(3));
    CHECK(c.as_alpha() == alpha);
    CHECK(CoefficientPair::from_alpha(c.as_alpha()) == c);
    CHECK(c.theta() == (c.beta + c.delta));
    CHECK_THROWS_AS(CoefficientPair::from_alpha(Vector::Zero(3)), InvalidArgument);
  }

  TEST_CASE("active set extraction") {
    Vector v(4);
    v << 0, 0.5, 0, -1e-12;
    auto s = active_set(v, 1e-8);
    CHECK(s.indices == std::vector<Index>{1});
    CHECK(active_set(Vector::Zero(5)).empty());
    Vector w(2);
    w << 1, -1;
    CHECK(active_set(w, 0.0).indices == std::vector<Index>{0, 1});
    CHECK_THROWS_AS(active_set(w, -1.0), InvalidArgument);
  }

  TEST_CASE("active set helpers") {
    Vector v(6);
    v << 1, 0, 2, 0, 3, 0;
    const auto s = active_set(v);
    CHECK(s.contains(2));
    CHECK_FALSE(s.contains(1));
    CHECK(s.count_below(3) == 2);
    CHECK(s.includes(active_set((Vector(6) << 1, 0, 0, 0, 1, 0).finished())));
    CHECK_FALSE(s.includes(active_set((Vector(6) << 0, 1, 0, 0, 0, 0).finished())));
  }

  TEST_CASE("direction parsing") {
    CHECK(parse_direction("greater") == IndicatorDirection::Greater);
    CHECK(parse_direction("less") == IndicatorDirection::Less);
    CHECK(std::string(to_string(IndicatorDirection::Less)) == "less");
    CHECK_THROWS_AS(parse_direction("sideways"), InvalidArgument);
  }
}

TEST_SUITE("core_model properties") {
  TEST_CASE("greater and less masks partition observations off the threshold") {
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const Index n = 30;
      Vector q(n);
      for (Index i = 0; i < n; ++i) q(i) = std::round(u(rng) * 10.0) / 10.0;  // many ties
      const Dataset d(Vector::Zero(n), Matrix::Ones(n, 1), q);
      const double tau = std::round(u(rng) * 10.0) / 10.0;
      const auto g = build_threshold_design(d, tau, IndicatorDirection::Greater);
      const auto l = build_threshold_design(d, tau, IndicatorDirection::Less);
      for (Index i = 0; i < n; ++i) {
        if (q(i) == tau) {
          CHECK_FALSE(g.regime_mask()(i));
          CHECK_FALSE(l.regime_mask()(i));
        } else {
          CHECK(g.regime_mask()(i) != l.regime_mask()(i));
        }
      }
    }
  }

  TEST_CASE("flipping conventions preserves predictions off the threshold") {
    Rng rng(5);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const Index n = 40, p = 5;
      Matrix x(n, p);
      Vector q(n);
      for (Index i = 0; i < n; ++i) {
        q(i) = u(rng);
        for (Index j = 0; j < p; ++j) x(i, j) = z(rng);
      }
      const Dataset d(Vector::Zero(n), x, q);
      CoefficientPair a{Vector(p), Vector(p)};
      for (Index j = 0; j < p; ++j) {
        a.beta(j) = z(rng);
        a.delta(j) = z(rng);
      }
      const double tau = u(rng);
      const Vector less = linear_predictor(build_threshold_design(d, tau, IndicatorDirection::Less), a);
      const Vector greater =
          linear_predictor(build_threshold_design(d, tau, IndicatorDirection::Greater), flip_direction(a));
      CHECK((less - greater).cwiseAbs().maxCoeff() < 1e-12);
      const auto twice = flip_direction(flip_direction(a));
      CHECK((twice.beta - a.beta).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(twice.delta == a.delta);
    }
  }
}
