#include "obsel/model.hpp"

#include "obsel/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace obsel {

namespace {

void check_state(const Vector& x, Eigen::Index n_x) {
  if (x.size() != n_x) {
    throw ArgumentError("state has length " + std::to_string(x.size()) + ", model expects " +
                        std::to_string(n_x));
  }
  if (!x.allFinite()) {
    throw ArgumentError("state contains non-finite entries");
  }
}

}  // namespace

MeasurementMatrix::MeasurementMatrix(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1 || rows_.cols() < 1) {
    throw ArgumentError("measurement matrix needs at least one row and one column");
  }
  if (!rows_.allFinite()) {
    throw ArgumentError("measurement matrix contains non-finite entries");
  }
  for (Eigen::Index j = 0; j < rows_.rows(); ++j) {
    if ((rows_.row(j).array() == 0.0).all()) {
      throw ArgumentError("measurement row " + std::to_string(j + 1) + " is all zero");
    }
  }
}

MeasurementMatrix MeasurementMatrix::identity(Eigen::Index n) {
  return MeasurementMatrix(Matrix::Identity(n, n));
}

SensorSet::SensorSet(std::initializer_list<std::size_t> members)
    : SensorSet(std::vector<std::size_t>(members)) {}

SensorSet::SensorSet(std::vector<std::size_t> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
    throw ArgumentError("sensor set contains duplicate indices");
  }
}

SensorSet SensorSet::from_indicator(const std::vector<bool>& gamma) {
  std::vector<std::size_t> m;
  for (std::size_t j = 0; j < gamma.size(); ++j) {
    if (gamma[j]) m.push_back(j);
  }
  return SensorSet(std::move(m));
}

SensorSet SensorSet::all(std::size_t n) {
  std::vector<std::size_t> m(n);
  for (std::size_t j = 0; j < n; ++j) m[j] = j;
  return SensorSet(std::move(m));
}

bool SensorSet::contains(std::size_t j) const {
  return std::binary_search(members_.begin(), members_.end(), j);
}

std::vector<bool> SensorSet::indicator(std::size_t n) const {
  check_range(n);
  std::vector<bool> gamma(n, false);
  for (auto j : members_) gamma[j] = true;
  return gamma;
}

SensorSet SensorSet::with(std::size_t j) const {
  auto m = members_;
  m.push_back(j);
  return SensorSet(std::move(m));
}

void SensorSet::check_range(std::size_t n) const {
  if (!members_.empty() && members_.back() >= n) {
    throw ArgumentError("sensor index " + std::to_string(members_.back() + 1) + " out of range 1.." +
                        std::to_string(n));
  }
}

ModelSpec::ModelSpec(Eigen::Index n_x, DynamicsFn dynamics, JacobianFn jacobian,
                     MeasurementMatrix measurement)
    : n_x_(n_x),
      dynamics_(std::move(dynamics)),
      jacobian_(std::move(jacobian)),
      measurement_(std::move(measurement)),
      analytic_jacobian_(static_cast<bool>(jacobian_)) {
  if (n_x_ < 1) throw ArgumentError("model needs at least one state");
  if (!dynamics_) throw ArgumentError("model has no dynamics function");
  if (measurement_.num_states() != n_x_) {
    throw ArgumentError("measurement matrix has " + std::to_string(measurement_.num_states()) +
                        " columns, model has " + std::to_string(n_x_) + " states");
  }
  if (!jacobian_) {
    jacobian_ = [f = dynamics_](const Vector& x) { return fd_jacobian(f, x); };
  }
}

ModelSpec ModelSpec::with_measurement(MeasurementMatrix measurement) const {
  ModelSpec copy = *this;
  if (measurement.num_states() != n_x_) {
    throw ArgumentError("measurement matrix column count does not match model");
  }
  copy.measurement_ = std::move(measurement);
  return copy;
}

Vector eval_dynamics(const ModelSpec& model, const Vector& x) {
  check_state(x, model.n_x());
  Vector fx = model.dynamics()(x);
  if (fx.size() != model.n_x()) throw ArgumentError("dynamics returned wrong length");
  return fx;
}

Matrix eval_jacobian(const ModelSpec& model, const Vector& x) {
  check_state(x, model.n_x());
  Matrix jac = model.jacobian()(x);
  if (jac.rows() != model.n_x() || jac.cols() != model.n_x()) {
    throw ArgumentError("jacobian returned wrong shape");
  }
  return jac;
}

Matrix fd_jacobian(const DynamicsFn& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw ArgumentError("finite-difference step must be positive");
  const Eigen::Index n = x.size();
  Matrix jac(n, n);
  Vector xp = x;
  Vector xm = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    const Vector fp = f(xp);
    const Vector fm = f(xm);
    if (fp.size() != n || fm.size() != n) throw ArgumentError("dynamics returned wrong length");
    jac.col(i) = (fp - fm) / (xp[i] - xm[i]);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return jac;
}

Matrix fd_jacobian(const ModelSpec& model, const Vector& x, double h) {
  check_state(x, model.n_x());
  return fd_jacobian(model.dynamics(), x, h);
}

ModelSpec zero_model(Eigen::Index n, MeasurementMatrix c) {
  return ModelSpec(
      n, [n](const Vector&) { return Vector::Zero(n).eval(); },
      [n](const Vector&) { return Matrix::Zero(n, n).eval(); }, std::move(c));
}

ModelSpec linear_model(const Matrix& a, MeasurementMatrix c) {
  if (a.rows() != a.cols()) throw ArgumentError("linear model needs a square matrix");
  return ModelSpec(
      a.rows(), [a](const Vector& x) { return (a * x).eval(); }, [a](const Vector&) { return a; },
      std::move(c));
}

}  // namespace obsel
