#include "obsel/sensitivity.hpp"

#include "obsel/errors.hpp"

#include <algorithm>
#include <cmath>

namespace obsel {

Matrix SensitivityStack::stacked() const {
  if (xis.empty()) return {};
  const auto n = xis.front().rows();
  Matrix out(static_cast<Eigen::Index>(xis.size()) * n, n);
  for (std::size_t i = 0; i < xis.size(); ++i) {
    out.middleRows(static_cast<Eigen::Index>(i) * n, n) = xis[i];
  }
  return out;
}

SensitivityStack propagate_sensitivities(const ModelSpec& model, const Trajectory& traj,
                                         const IrkConfig& cfg) {
  if (traj.states.empty() || traj.stages.size() + 1 != traj.states.size()) {
    throw ArgumentError("trajectory has no stage values; produce it with simulate()");
  }
  const auto n = model.n_x();
  SensitivityStack stack;
  stack.xis.reserve(traj.size());
  stack.xis.push_back(Matrix::Identity(n, n));
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const Matrix step = step_jacobian(model, traj.states[i], traj.stages[i], cfg);
    stack.xis.push_back(step * stack.xis.back());
  }
  return stack;
}

SensitivityStack fd_sensitivity(const ModelSpec& model, const Vector& x0, std::size_t N,
                                const IrkConfig& cfg, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite-difference step must be positive");
  const auto n = model.n_x();
  SensitivityStack stack;
  stack.xis.assign(N, Matrix::Zero(n, n));
  for (Eigen::Index c = 0; c < n; ++c) {
    const double step = h * std::max(1.0, std::abs(x0[c]));
    Vector xp = x0;
    Vector xm = x0;
    xp[c] += step;
    xm[c] -= step;
    const Trajectory tp = simulate(model, xp, N, cfg);
    const Trajectory tm = simulate(model, xm, N, cfg);
    const double width = xp[c] - xm[c];
    for (std::size_t i = 0; i < N; ++i) {
      stack.xis[i].col(c) = (tp.states[i] - tm.states[i]) / width;
    }
  }
  return stack;
}

}  // namespace obsel
