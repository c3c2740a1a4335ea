#pragma once

// Dynamical-network abstraction: autonomous dynamics x' = f(x) observed
// through a measurement matrix whose rows are candidate sensors.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <vector>

namespace obsel {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using DynamicsFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/// Rows are sensors c_j. At least one row, none all-zero.
class MeasurementMatrix {
 public:
  explicit MeasurementMatrix(Matrix rows);

  static MeasurementMatrix identity(Eigen::Index n);

  Eigen::Index num_sensors() const { return rows_.rows(); }
  Eigen::Index num_states() const { return rows_.cols(); }
  const Matrix& matrix() const { return rows_; }
  auto row(Eigen::Index j) const { return rows_.row(j); }

 private:
  Matrix rows_;
};

/// Ordered, duplicate-free set of 0-based sensor indices.
class SensorSet {
 public:
  SensorSet() = default;
  SensorSet(std::initializer_list<std::size_t> members);
  explicit SensorSet(std::vector<std::size_t> members);

  /// Builds from the binary selection vector gamma.
  static SensorSet from_indicator(const std::vector<bool>& gamma);
  static SensorSet all(std::size_t n);

  const std::vector<std::size_t>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(std::size_t j) const;

  std::vector<bool> indicator(std::size_t n) const;
  SensorSet with(std::size_t j) const;

  /// Throws ArgumentError if any member is >= n.
  void check_range(std::size_t n) const;

  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  friend bool operator==(const SensorSet&, const SensorSet&) = default;

 private:
  std::vector<std::size_t> members_;
};

class ModelSpec {
 public:
  /// Pass an empty jacobian to fall back to central differences.
  ModelSpec(Eigen::Index n_x, DynamicsFn dynamics, JacobianFn jacobian, MeasurementMatrix measurement);

  Eigen::Index n_x() const { return n_x_; }
  Eigen::Index n_y() const { return measurement_.num_sensors(); }
  const MeasurementMatrix& measurement() const { return measurement_; }
  bool has_analytic_jacobian() const { return analytic_jacobian_; }

  const DynamicsFn& dynamics() const { return dynamics_; }
  const JacobianFn& jacobian() const { return jacobian_; }

  /// Same dynamics, different sensors.
  ModelSpec with_measurement(MeasurementMatrix measurement) const;

 private:
  Eigen::Index n_x_;
  DynamicsFn dynamics_;
  JacobianFn jacobian_;
  MeasurementMatrix measurement_;
  bool analytic_jacobian_;
};

Vector eval_dynamics(const ModelSpec& model, const Vector& x);
Matrix eval_jacobian(const ModelSpec& model, const Vector& x);

/// Central differences with per-coordinate step h*max(1,|x_i|).
Matrix fd_jacobian(const ModelSpec& model, const Vector& x, double h = 1e-6);
Matrix fd_jacobian(const DynamicsFn& f, const Vector& x, double h = 1e-6);

// Small reference models used by tests, benches and examples.
ModelSpec zero_model(Eigen::Index n, MeasurementMatrix c);
ModelSpec linear_model(const Matrix& a, MeasurementMatrix c);

}  // namespace obsel
