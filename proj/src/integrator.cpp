#include "obsel/integrator.hpp"

#include "obsel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace obsel {

namespace {

constexpr double kA11 = 0.25;
constexpr double kA12 = -0.25;
constexpr double kA21 = 0.25;
constexpr double kA22 = 5.0 / 12.0;
constexpr double kB1 = 0.25;
constexpr double kB2 = 0.75;
constexpr double kC2 = 2.0 / 3.0;

// [[I - T a11 J1, -T a12 J2], [-T a21 J1, I - T a22 J2]]
Matrix stage_matrix(const Matrix& j1, const Matrix& j2, double T) {
  const auto n = j1.rows();
  Matrix m(2 * n, 2 * n);
  m.topLeftCorner(n, n) = Matrix::Identity(n, n) - T * kA11 * j1;
  m.topRightCorner(n, n) = -T * kA12 * j2;
  m.bottomLeftCorner(n, n) = -T * kA21 * j1;
  m.bottomRightCorner(n, n) = Matrix::Identity(n, n) - T * kA22 * j2;
  return m;
}

}  // namespace

void IrkConfig::validate() const {
  if (!(T > 0.0) || !std::isfinite(T)) throw ArgumentError("step size T must be positive");
  if (!(newton_tol > 0.0)) throw ArgumentError("newton_tol must be positive");
  if (newton_max_iters < 1) throw ArgumentError("newton_max_iters must be at least 1");
}

double stability_function(double z) { return (1.0 + z / 3.0) / (1.0 - 2.0 * z / 3.0 + z * z / 6.0); }

StepResult irk_step(const ModelSpec& model, const Vector& x_k, const IrkConfig& cfg,
                    std::size_t step_index) {
  cfg.validate();
  const auto n = model.n_x();
  const double T = cfg.T;

  StepResult out;
  Vector& z1 = out.stages.z1;
  Vector& z2 = out.stages.z2;
  if (cfg.stage_guess == StageGuess::ExplicitEuler) {
    const Vector f0 = eval_dynamics(model, x_k);
    z1 = x_k;
    z2 = x_k + kC2 * T * f0;
  } else {
    z1 = x_k;
    z2 = x_k;
  }

  const double tol = cfg.newton_tol * std::max(1.0, x_k.lpNorm<Eigen::Infinity>());
  Vector f1 = eval_dynamics(model, z1);
  Vector f2 = eval_dynamics(model, z2);
  Vector residual(2 * n);
  auto fill_residual = [&] {
    residual.head(n) = z1 - x_k - T * (kA11 * f1 + kA12 * f2);
    residual.tail(n) = z2 - x_k - T * (kA21 * f1 + kA22 * f2);
  };
  fill_residual();
  double res_norm = residual.lpNorm<Eigen::Infinity>();

  int iter = 0;
  while (!(res_norm <= tol)) {
    if (iter >= cfg.newton_max_iters || !std::isfinite(res_norm)) {
      throw IntegrationError("Newton iteration for IRK stages did not converge at step " +
                                 std::to_string(step_index) + " (residual " +
                                 std::to_string(res_norm) + ")",
                             step_index, res_norm);
    }
    const Matrix m = stage_matrix(eval_jacobian(model, z1), eval_jacobian(model, z2), T);
    const Vector delta = m.partialPivLu().solve(residual);
    z1 -= delta.head(n);
    z2 -= delta.tail(n);
    f1 = eval_dynamics(model, z1);
    f2 = eval_dynamics(model, z2);
    fill_residual();
    res_norm = residual.lpNorm<Eigen::Infinity>();
    ++iter;
  }

  out.newton_iterations = iter;
  out.next = x_k + T * (kB1 * f1 + kB2 * f2);
  return out;
}

Trajectory simulate(const ModelSpec& model, const Vector& x0, std::size_t N, const IrkConfig& cfg) {
  if (N < 1) throw ArgumentError("observation window N must be at least 1");
  cfg.validate();
  Trajectory traj;
  traj.states.reserve(N);
  traj.stages.reserve(N - 1);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k + 1 < N; ++k) {
    StepResult step = irk_step(model, traj.states[k], cfg, k);
    traj.states.push_back(std::move(step.next));
    traj.stages.push_back(std::move(step.stages));
  }
  return traj;
}

Matrix step_jacobian(const ModelSpec& model, const Vector& x_k, const StagePair& stages,
                     const IrkConfig& cfg) {
  const auto n = model.n_x();
  if (x_k.size() != n || stages.z1.size() != n || stages.z2.size() != n) {
    throw ArgumentError("step_jacobian: dimension mismatch");
  }
  const double T = cfg.T;
  const Matrix j1 = eval_jacobian(model, stages.z1);
  const Matrix j2 = eval_jacobian(model, stages.z2);
  const Matrix m = stage_matrix(j1, j2, T);

  Eigen::PartialPivLU<Matrix> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond > std::numeric_limits<double>::epsilon())) {
    throw NumericalError("stage linear system is singular (rcond estimate " + std::to_string(rcond) +
                         ")");
  }
  Matrix rhs(2 * n, n);
  rhs.topRows(n).setIdentity();
  rhs.bottomRows(n).setIdentity();
  const Matrix dz = lu.solve(rhs);
  return Matrix::Identity(n, n) + T * (kB1 * j1 * dz.topRows(n) + kB2 * j2 * dz.bottomRows(n));
}

}  // namespace obsel
