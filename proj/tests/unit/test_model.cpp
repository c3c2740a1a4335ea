#include "obsel/errors.hpp"
#include "obsel/model.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>

using namespace obsel;

TEST_CASE("measurement matrix rejects bad rows") {
  CHECK_THROWS_AS(MeasurementMatrix(Matrix(0, 3)), ArgumentError);
  Matrix zero_row = Matrix::Identity(3, 3);
  zero_row.row(1).setZero();
  CHECK_THROWS_AS(MeasurementMatrix(zero_row), ArgumentError);
  Matrix nan_entry = Matrix::Identity(2, 2);
  nan_entry(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(MeasurementMatrix(nan_entry), ArgumentError);

  const auto id = MeasurementMatrix::identity(4);
  CHECK(id.num_sensors() == 4);
  CHECK(id.num_states() == 4);
}

TEST_CASE("sensor sets are sorted and duplicate free") {
  const SensorSet s{3, 0, 2};
  CHECK(s.members() == std::vector<std::size_t>{0, 2, 3});
  CHECK(s.contains(2));
  CHECK_FALSE(s.contains(1));
  CHECK(s.with(1) == SensorSet{0, 1, 2, 3});
  CHECK_THROWS_AS((SensorSet{1, 1}), ArgumentError);
  CHECK_THROWS_AS(s.check_range(3), ArgumentError);
  CHECK_NOTHROW(s.check_range(4));

  const auto gamma = s.indicator(5);
  CHECK(gamma == std::vector<bool>{true, false, true, true, false});
  CHECK(SensorSet::from_indicator(gamma) == s);
  CHECK(SensorSet::all(3) == SensorSet{0, 1, 2});
}

TEST_CASE("model dimension checks") {
  const auto m = zero_model(3, MeasurementMatrix::identity(3));
  CHECK(eval_dynamics(m, Vector::Ones(3)).isZero());
  CHECK_THROWS_AS(eval_dynamics(m, Vector::Ones(2)), ArgumentError);
  CHECK_THROWS_AS(ModelSpec(2, {}, {}, MeasurementMatrix::identity(3)), ArgumentError);
}

TEST_CASE("finite-difference Jacobian matches the analytic one") {
  DynamicsFn f = [](const Vector& x) {
    Vector out(2);
    out << x[0] * x[1], std::sin(x[0]) - x[1] * x[1];
    return out;
  };
  const Vector x = (Vector(2) << 0.7, -1.3).finished();
  Matrix expected(2, 2);
  expected << x[1], x[0], std::cos(x[0]), -2.0 * x[1];
  CHECK((fd_jacobian(f, x) - expected).cwiseAbs().maxCoeff() < 1e-8);

  const ModelSpec model(2, f, {}, MeasurementMatrix::identity(2));
  CHECK_FALSE(model.has_analytic_jacobian());
  CHECK((eval_jacobian(model, x) - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("linear model exposes A as its Jacobian") {
  Matrix a(2, 2);
  a << -1, 2, 0, -3;
  const auto m = linear_model(a, MeasurementMatrix::identity(2));
  CHECK(m.has_analytic_jacobian());
  CHECK(eval_jacobian(m, Vector::Random(2)) == a);
  const Vector x = (Vector(2) << 1, 1).finished();
  CHECK(eval_dynamics(m, x) == a * x);
}
