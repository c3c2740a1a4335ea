#pragma once

#include "obsel/integrator.hpp"
#include "obsel/model.hpp"

#include <cstddef>
#include <vector>

namespace obsel {

/// xi_i = d x_i / d x_0 for i = 0..N-1; xi_0 = I.
struct SensitivityStack {
  std::vector<Matrix> xis;

  std::size_t size() const { return xis.size(); }
  /// Stacked N*n_x x n_x form (col{xi_i}).
  Matrix stacked() const;
};

/// Forward recursion xi_{i+1} = (d x_{i+1} / d x_i) xi_i along a simulated trajectory.
SensitivityStack propagate_sensitivities(const ModelSpec& model, const Trajectory& traj,
                                         const IrkConfig& cfg);

/// Central differences of full re-simulations, column i perturbed by
/// h * max(1, |x0_i|). Test oracle.
SensitivityStack fd_sensitivity(const ModelSpec& model, const Vector& x0, std::size_t N,
                                const IrkConfig& cfg, double h = 1e-6);

}  // namespace obsel
