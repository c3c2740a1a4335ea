#include "obsel/estimation.hpp"

#include "obsel/errors.hpp"
#include "obsel/gramian.hpp"
#include "obsel/sensitivity.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace obsel {

EstimationProblem EstimationProblem::for_concentrations(ModelSpec model, SensorSet sensors,
                                                        Vector y_tilde, Vector x0_guess) {
  const auto n = model.n_x();
  return EstimationProblem{std::move(model),
                           std::move(sensors),
                           std::move(y_tilde),
                           std::nullopt,
                           Vector::Zero(n),
                           Vector::Constant(n, std::numeric_limits<double>::infinity()),
                           std::move(x0_guess)};
}

std::size_t EstimationProblem::window() const {
  if (sensors.empty()) return 0;
  return static_cast<std::size_t>(y_tilde.size()) / sensors.size();
}

void EstimationProblem::validate() const {
  const auto n = model.n_x();
  if (sensors.empty()) throw ArgumentError("estimation needs at least one sensor");
  sensors.check_range(static_cast<std::size_t>(model.n_y()));
  if (y_tilde.size() == 0 || y_tilde.size() % static_cast<Eigen::Index>(sensors.size()) != 0) {
    throw ArgumentError("lifted measurement length is not a multiple of the sensor count");
  }
  if (lower.size() != n || upper.size() != n || x0_guess.size() != n) {
    throw ArgumentError("bounds and initial guess must have length n_x");
  }
  if ((lower.array() > upper.array()).any()) throw ArgumentError("lower bound exceeds upper bound");
  if ((x0_guess.array() < lower.array()).any() || (x0_guess.array() > upper.array()).any()) {
    throw ArgumentError("initial guess violates the bounds");
  }
  if (Q) {
    if (Q->rows() != y_tilde.size() || Q->cols() != y_tilde.size()) {
      throw ArgumentError("weighting matrix must be square with the lifted measurement dimension");
    }
    if (!Q->isApprox(Q->transpose(), 1e-12)) throw ArgumentError("weighting matrix is not symmetric");
  }
}

namespace {

Matrix selected_rows(const MeasurementMatrix& c, const SensorSet& s) {
  Matrix out(static_cast<Eigen::Index>(s.size()), c.num_states());
  Eigen::Index r = 0;
  for (auto j : s) out.row(r++) = c.row(static_cast<Eigen::Index>(j));
  return out;
}

void check_window(const EstimationProblem& prob, std::size_t N) {
  prob.validate();
  if (prob.window() != N) {
    throw ArgumentError("lifted measurement covers " + std::to_string(prob.window()) +
                        " time steps, expected N=" + std::to_string(N));
  }
}

Vector clamp(const Vector& x, const Vector& lo, const Vector& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

struct Evaluation {
  Vector h;
  Matrix jac;  // J_h
  double objective = 0.0;
  Vector half_grad;  // J_h^T Q h
  Matrix hessian;    // J_h^T Q J_h
};

Evaluation evaluate(const EstimationProblem& prob, const Vector& x, std::size_t N,
                    const IrkConfig& cfg) {
  const Trajectory traj = simulate(prob.model, x, N, cfg);
  const Matrix cs = selected_rows(prob.model.measurement(), prob.sensors);
  const auto m = cs.rows();
  Evaluation ev;
  ev.h.resize(static_cast<Eigen::Index>(N) * m);
  for (std::size_t i = 0; i < N; ++i) {
    ev.h.segment(static_cast<Eigen::Index>(i) * m, m) =
        prob.y_tilde.segment(static_cast<Eigen::Index>(i) * m, m) - cs * traj.states[i];
  }
  const SensitivityStack stack = propagate_sensitivities(prob.model, traj, cfg);
  ev.jac = -lifted_output_jacobian(prob.model.measurement(), prob.sensors, stack);
  if (prob.Q) {
    const Vector qh = *prob.Q * ev.h;
    ev.objective = ev.h.dot(qh);
    ev.half_grad = ev.jac.transpose() * qh;
    ev.hessian = ev.jac.transpose() * (*prob.Q) * ev.jac;
  } else {
    ev.objective = ev.h.squaredNorm();
    ev.half_grad = ev.jac.transpose() * ev.h;
    ev.hessian = ev.jac.transpose() * ev.jac;
  }
  if (!std::isfinite(ev.objective)) throw NumericalError("non-finite least-squares objective");
  return ev;
}

}  // namespace

Vector lifted_output(const ModelSpec& model, const SensorSet& s, const Vector& x0, std::size_t N,
                     const IrkConfig& cfg) {
  s.check_range(static_cast<std::size_t>(model.n_y()));
  const Trajectory traj = simulate(model, x0, N, cfg);
  const Matrix cs = selected_rows(model.measurement(), s);
  const auto m = cs.rows();
  Vector g(static_cast<Eigen::Index>(N) * m);
  for (std::size_t i = 0; i < N; ++i) g.segment(static_cast<Eigen::Index>(i) * m, m) = cs * traj.states[i];
  return g;
}

Vector lifted_residual(const EstimationProblem& prob, const Vector& x0, std::size_t N,
                       const IrkConfig& cfg) {
  check_window(prob, N);
  return prob.y_tilde - lifted_output(prob.model, prob.sensors, x0, N, cfg);
}

Matrix lifted_residual_jacobian(const EstimationProblem& prob, const Vector& x0, std::size_t N,
                                const IrkConfig& cfg) {
  check_window(prob, N);
  const Trajectory traj = simulate(prob.model, x0, N, cfg);
  const SensitivityStack stack = propagate_sensitivities(prob.model, traj, cfg);
  return -lifted_output_jacobian(prob.model.measurement(), prob.sensors, stack);
}

EstimationResult estimate_initial_state(const EstimationProblem& prob, std::size_t N,
                                        const IrkConfig& cfg, const SolverOptions& opts) {
  check_window(prob, N);
  const auto n = prob.model.n_x();
  const Vector& lo = prob.lower;
  const Vector& hi = prob.upper;

  Vector x = clamp(prob.x0_guess, lo, hi);
  Evaluation cur = evaluate(prob, x, N, cfg);

  EstimationResult res;
  res.objective_history.push_back(cur.objective);

  const double max_diag = cur.hessian.diagonal().maxCoeff();
  double mu = opts.initial_damping * (max_diag > 0.0 ? max_diag : 1.0);
  double nu = 2.0;

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Vector grad = 2.0 * cur.half_grad;
    const Vector pg = x - clamp(x - grad, lo, hi);
    if (pg.lpNorm<Eigen::Infinity>() <= opts.gtol * std::max(1.0, cur.objective)) {
      res.converged = true;
      break;
    }

    // Variables pinned at a bound with the gradient pushing outward stay fixed.
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool pinned_lo = x[i] <= lo[i] && grad[i] > 0.0;
      const bool pinned_hi = x[i] >= hi[i] && grad[i] < 0.0;
      if (!pinned_lo && !pinned_hi) free.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    Matrix a(nf, nf);
    Vector rhs(nf);
    const double diag_floor = 1e-12 * std::max(1.0, cur.hessian.diagonal().maxCoeff());
    for (Eigen::Index r = 0; r < nf; ++r) {
      rhs[r] = -cur.half_grad[free[r]];
      for (Eigen::Index c = 0; c < nf; ++c) a(r, c) = cur.hessian(free[r], free[c]);
      a(r, r) += mu * std::max(cur.hessian(free[r], free[r]), diag_floor);
    }
    const Vector step_f = a.ldlt().solve(rhs);
    Vector trial = x;
    for (Eigen::Index r = 0; r < nf; ++r) trial[free[r]] += step_f[r];
    trial = clamp(trial, lo, hi);
    const Vector d = trial - x;

    if (!d.allFinite() ||
        d.lpNorm<Eigen::Infinity>() <= opts.xtol * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      res.converged = d.allFinite();
      break;
    }

    std::optional<Evaluation> next;
    try {
      next = evaluate(prob, trial, N, cfg);
    } catch (const NumericalError&) {
      next.reset();
    } catch (const DomainError&) {
      next.reset();
    }

    if (next && next->objective < cur.objective) {
      const double predicted = -2.0 * d.dot(cur.half_grad) - d.dot(cur.hessian * d);
      const double rho = predicted > 0.0 ? (cur.objective - next->objective) / predicted : 0.0;
      mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      nu = 2.0;
      x = trial;
      cur = std::move(*next);
      res.objective_history.push_back(cur.objective);
    } else {
      mu *= nu;
      nu *= 2.0;
      if (!std::isfinite(mu)) break;
    }
  }

  res.x_hat = x;
  res.objective = cur.objective;
  res.iterations = it;
  return res;
}

double relative_error(const Vector& x_true, const Vector& x_hat) {
  if (x_true.size() != x_hat.size()) throw ArgumentError("relative_error: length mismatch");
  const double denom = x_true.norm();
  if (!(denom > 0.0)) throw DomainError("relative error undefined for a zero true state");
  return (x_true - x_hat).norm() / denom;
}

std::string measurements_csv(const SensorSet& s, const Vector& y_tilde) {
  if (s.empty()) throw ArgumentError("no sensors selected");
  const auto m = static_cast<Eigen::Index>(s.size());
  if (y_tilde.size() % m != 0) throw ArgumentError("measurement length is not a multiple of |S|");
  std::ostringstream out;
  bool first = true;
  for (auto j : s) {
    out << (first ? "" : ",") << 'y' << (j + 1);
    first = false;
  }
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < y_tilde.size() / m; ++i) {
    for (Eigen::Index c = 0; c < m; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", y_tilde[i * m + c]);
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  return out.str();
}

void write_measurements_csv(const std::string& path, const SensorSet& s, const Vector& y_tilde) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << measurements_csv(s, y_tilde);
}

MeasurementData parse_measurements_csv(const std::string& text, std::size_t n_y) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("measurement CSV: missing header");
  std::vector<std::size_t> cols;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      if (cell.size() < 2 || cell[0] != 'y') throw ParseError("measurement CSV: bad header '" + cell + "'");
      std::size_t pos = 0;
      unsigned long idx = 0;
      try {
        idx = std::stoul(cell.substr(1), &pos);
      } catch (const std::exception&) {
        throw ParseError("measurement CSV: bad header '" + cell + "'");
      }
      if (pos != cell.size() - 1 || idx < 1 || idx > n_y) {
        throw ParseError("measurement CSV: sensor '" + cell + "' out of range");
      }
      cols.push_back(idx - 1);
    }
  }
  if (!std::is_sorted(cols.begin(), cols.end()) ||
      std::adjacent_find(cols.begin(), cols.end()) != cols.end()) {
    throw ParseError("measurement CSV: sensor columns must be strictly ascending");
  }
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("measurement CSV: bad value '" + cell + "' on row " + std::to_string(rows + 1));
      }
      ++count;
    }
    if (count != cols.size()) {
      throw ParseError("measurement CSV: row " + std::to_string(rows + 1) + " has " +
                       std::to_string(count) + " values, expected " + std::to_string(cols.size()));
    }
    ++rows;
  }
  MeasurementData data;
  data.sensors = SensorSet(cols);
  data.y_tilde = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  data.window = rows;
  return data;
}

MeasurementData read_measurements_csv(const std::string& path, std::size_t n_y) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_measurements_csv(ss.str(), n_y);
}

std::string to_json(const EstimationResult& result) {
  nlohmann::ordered_json doc;
  doc["x_hat"] = std::vector<double>(result.x_hat.data(), result.x_hat.data() + result.x_hat.size());
  doc["objective"] = result.objective;
  doc["iterations"] = result.iterations;
  doc["converged"] = result.converged;
  if (result.relative_error) {
    doc["relative_error"] = *result.relative_error;
  } else {
    doc["relative_error"] = nullptr;
  }
  doc["objective_history"] = result.objective_history;
  return doc.dump(2);
}

}  // namespace obsel
