#include "obsel/errors.hpp"
#include "obsel/estimation.hpp"
#include "obsel/kinetics.hpp"
#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>

using namespace obsel;

namespace {

const IrkConfig kCfg{};

EstimationProblem bundled_problem(const SensorSet& s, std::size_t N, const Vector& guess) {
  const auto model = kinetics::to_model(testing::bundled_network());
  const Vector y = lifted_output(model, s, testing::bundled_state(), N, kCfg);
  return EstimationProblem::for_concentrations(model, s, y, guess);
}

}  // namespace

TEST_CASE("residual vanishes at the truth and its Jacobian matches differences") {
  const auto prob = bundled_problem(SensorSet{1, 3}, 30, testing::bundled_state());
  CHECK(lifted_residual(prob, testing::bundled_state(), 30, kCfg).cwiseAbs().maxCoeff() == 0.0);

  const Vector x = testing::bundled_state() * 1.05;
  const Matrix jac = lifted_residual_jacobian(prob, x, 30, kCfg);
  REQUIRE(jac.rows() == 60);
  for (int i = 0; i < 6; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const Vector fd = (lifted_residual(prob, xp, 30, kCfg) - lifted_residual(prob, xm, 30, kCfg)) / (2.0 * h);
    CHECK((jac.col(i) - fd).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("noiseless recovery on the bundled network") {
  const auto prob = bundled_problem(SensorSet::all(6), 200, testing::bundled_state() * 1.1);
  const auto res = estimate_initial_state(prob, 200, kCfg);
  CHECK(res.converged);
  CHECK(relative_error(testing::bundled_state(), res.x_hat) < 1e-8);
  for (std::size_t k = 1; k < res.objective_history.size(); ++k) {
    CHECK(res.objective_history[k] <= res.objective_history[k - 1]);
  }
  CHECK((res.x_hat.array() >= 0.0).all());
}

TEST_CASE("weighting by a scalar multiple leaves the minimizer unchanged") {
  auto prob = bundled_problem(SensorSet{0, 2, 5}, 100, testing::bundled_state() * 0.95);
  const auto plain = estimate_initial_state(prob, 100, kCfg);
  prob.Q = 4.0 * Matrix::Identity(300, 300);
  const auto weighted = estimate_initial_state(prob, 100, kCfg);
  CHECK((plain.x_hat - weighted.x_hat).cwiseAbs().maxCoeff() < 1e-8);
  prob.Q = Matrix::Identity(10, 10);
  CHECK_THROWS_AS(estimate_initial_state(prob, 100, kCfg), ArgumentError);
}

TEST_CASE("box constraints project the linear least-squares solution") {
  // x' = 0 observed directly: the unconstrained fit is the mean of each channel.
  const auto model = zero_model(2, MeasurementMatrix::identity(2));
  Vector y(6);
  y << -1, 2, -1, 2, -1, 2;
  EstimationProblem prob{model, SensorSet{0, 1}, y, std::nullopt, Vector::Zero(2),
                         Vector::Constant(2, 1.5), Vector::Constant(2, 0.5)};
  const auto res = estimate_initial_state(prob, 3, kCfg);
  CHECK(res.converged);
  CHECK(res.x_hat[0] == 0.0);
  CHECK(res.x_hat[1] == 1.5);
  CHECK(res.objective == Catch::Approx(3.0 * (1.0 + 0.25)));
}

TEST_CASE("problem validation") {
  auto prob = bundled_problem(SensorSet{0}, 10, testing::bundled_state());
  CHECK_THROWS_AS(estimate_initial_state(prob, 11, kCfg), ArgumentError);
  prob.x0_guess[0] = -1.0;
  CHECK_THROWS_AS(estimate_initial_state(prob, 10, kCfg), ArgumentError);
  prob.x0_guess[0] = 1.0;
  prob.sensors = SensorSet{};
  CHECK_THROWS_AS(estimate_initial_state(prob, 10, kCfg), ArgumentError);
  CHECK_THROWS_AS(relative_error(Vector::Zero(3), Vector::Ones(3)), DomainError);
  CHECK(relative_error(Vector::Ones(4), Vector::Ones(4) * 1.5) == Catch::Approx(0.5));
}

TEST_CASE("measurement CSV round trip") {
  const SensorSet s{0, 4};
  const auto model = kinetics::to_model(testing::bundled_network());
  const Vector y = lifted_output(model, s, testing::bundled_state(), 7, kCfg);
  const std::string text = measurements_csv(s, y);
  CHECK(text.rfind("y1,y5\n", 0) == 0);
  const auto data = parse_measurements_csv(text, 6);
  CHECK(data.sensors == s);
  CHECK(data.window == 7);
  CHECK(data.y_tilde == y);

  const auto path = (std::filesystem::temp_directory_path() / "obsel_meas.csv").string();
  write_measurements_csv(path, s, y);
  CHECK(read_measurements_csv(path, 6).y_tilde == y);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(parse_measurements_csv("y1,y9\n1,2\n", 6), ParseError);
  CHECK_THROWS_AS(parse_measurements_csv("y1,y2\n1\n", 6), ParseError);
  CHECK_THROWS_AS(parse_measurements_csv("a,b\n1,2\n", 6), ParseError);
}

TEST_CASE("estimation result JSON") {
  EstimationResult res;
  res.x_hat = Vector::Ones(2);
  res.iterations = 3;
  res.objective_history = {2.0, 1.0};
  const auto doc = nlohmann::json::parse(to_json(res));
  CHECK(doc["x_hat"].size() == 2);
  CHECK(doc["relative_error"].is_null());
  CHECK(doc["iterations"] == 3);
}
