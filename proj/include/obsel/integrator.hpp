#pragma once

// Two-stage implicit Runge-Kutta (Radau IA, order 3) with full Newton on the
// stage equations
//
//   z1 = x + T/4  (f(z1) - f(z2))
//   z2 = x + T/12 (3 f(z1) + 5 f(z2))
//   x+ = x + T/4  (f(z1) + 3 f(z2))

#include "obsel/model.hpp"

#include <cstddef>
#include <vector>

namespace obsel {

enum class StageGuess {
  Hold,           // z1 = z2 = x_k
  ExplicitEuler,  // z_s = x_k + c_s T f(x_k)
};

struct IrkConfig {
  double T = 1e-3;
  /// Stage residual infinity-norm tolerance, relative to max(1, |x_k|_inf).
  double newton_tol = 1e-12;
  int newton_max_iters = 50;
  StageGuess stage_guess = StageGuess::Hold;

  void validate() const;
};

struct StagePair {
  Vector z1;
  Vector z2;
};

struct StepResult {
  Vector next;
  StagePair stages;
  int newton_iterations = 0;
};

/// states[k] for k = 0..N-1; stages[k] carries the stage values that map
/// states[k] to states[k+1] (N-1 entries).
struct Trajectory {
  std::vector<Vector> states;
  std::vector<StagePair> stages;

  std::size_t size() const { return states.size(); }
};

/// Throws IntegrationError (tagged with step_index) on Newton failure.
StepResult irk_step(const ModelSpec& model, const Vector& x_k, const IrkConfig& cfg,
                    std::size_t step_index = 0);

Trajectory simulate(const ModelSpec& model, const Vector& x0, std::size_t N, const IrkConfig& cfg);

/// d x_{k+1} / d x_k by implicit differentiation of the stage equations.
Matrix step_jacobian(const ModelSpec& model, const Vector& x_k, const StagePair& stages,
                     const IrkConfig& cfg);

/// R(z) = (1 + z/3) / (1 - 2z/3 + z^2/6), the scheme's stability function.
double stability_function(double z);

}  // namespace obsel
