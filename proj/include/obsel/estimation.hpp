#pragma once

// Initial-state estimation from a lifted measurement window:
//
//   minimize h(x0)^T Q h(x0)  s.t.  lower <= x0 <= upper,
//   h(x0) = y~ - col{ C_S x_i(x0) }_{i=0}^{N-1}.

#include "obsel/integrator.hpp"
#include "obsel/model.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace obsel {

struct EstimationProblem {
  ModelSpec model;
  SensorSet sensors;
  /// Time-major: blocks y~_0..y~_{N-1}, each the selected rows in ascending order.
  Vector y_tilde;
  /// Identity when empty.
  std::optional<Matrix> Q;
  Vector lower;
  Vector upper;
  Vector x0_guess;

  /// Defaults for concentration models: lower = 0, upper = +inf, Q = I.
  static EstimationProblem for_concentrations(ModelSpec model, SensorSet sensors, Vector y_tilde,
                                              Vector x0_guess);

  std::size_t window() const;
  void validate() const;
};

struct SolverOptions {
  int max_iterations = 200;
  /// Projected-gradient infinity norm <= gtol * max(1, objective).
  double gtol = 1e-10;
  /// Step infinity norm <= xtol * max(1, |x|_inf).
  double xtol = 1e-12;
  double initial_damping = 1e-3;
};

struct EstimationResult {
  Vector x_hat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::optional<double> relative_error;
  /// Accepted-iterate objective history, starting at the initial guess.
  std::vector<double> objective_history;
};

/// g(x0) = col{ C_S x_i }, stacked time-major.
Vector lifted_output(const ModelSpec& model, const SensorSet& s, const Vector& x0, std::size_t N,
                     const IrkConfig& cfg);

Vector lifted_residual(const EstimationProblem& prob, const Vector& x0, std::size_t N,
                       const IrkConfig& cfg);

/// J_h = -col{ C_S xi_i }.
Matrix lifted_residual_jacobian(const EstimationProblem& prob, const Vector& x0, std::size_t N,
                                const IrkConfig& cfg);

/// Box-constrained Levenberg-Marquardt. Non-convergence is reported through
/// converged=false with the best iterate; integration failure at the initial
/// guess throws.
EstimationResult estimate_initial_state(const EstimationProblem& prob, std::size_t N,
                                        const IrkConfig& cfg, const SolverOptions& opts = {});

/// JSON document with x_hat, objective, iterations, converged, relative_error
/// (null when unknown) and objective_history.
std::string to_json(const EstimationResult& result);

/// |x_true - x_hat|_2 / |x_true|_2. DomainError for a zero true state.
double relative_error(const Vector& x_true, const Vector& x_hat);

/// CSV with header y<j> (1-based sensor indices), one row per time index.
void write_measurements_csv(const std::string& path, const SensorSet& s, const Vector& y_tilde);
std::string measurements_csv(const SensorSet& s, const Vector& y_tilde);

struct MeasurementData {
  SensorSet sensors;
  Vector y_tilde;
  std::size_t window = 0;
};

MeasurementData read_measurements_csv(const std::string& path, std::size_t n_y);
MeasurementData parse_measurements_csv(const std::string& text, std::size_t n_y);

}  // namespace obsel
