#include "obsel/gramian.hpp"

#include "obsel/errors.hpp"

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace obsel {

GramianAtoms GramianAtoms::slice(std::size_t kappa) const {
  GramianAtoms out;
  out.atoms.push_back(atoms.at(kappa));
  out.N = N;
  out.n_x = n_x;
  out.n_y = n_y;
  return out;
}

std::vector<Matrix> build_atoms(const MeasurementMatrix& c, const SensitivityStack& stack) {
  const auto n = c.num_states();
  for (const auto& xi : stack.xis) {
    if (xi.rows() != n || xi.cols() != n) throw ArgumentError("sensitivity block has wrong shape");
  }
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(c.num_sensors()));
  for (Eigen::Index j = 0; j < c.num_sensors(); ++j) {
    Matrix g = Matrix::Zero(n, n);
    for (const auto& xi : stack.xis) {
      const Eigen::RowVectorXd r = c.row(j) * xi;
      g.noalias() += r.transpose() * r;
    }
    out.push_back(0.5 * (g + g.transpose()));
  }
  return out;
}

Matrix assemble(const GramianAtoms& atoms, std::size_t kappa, const SensorSet& s) {
  if (kappa >= atoms.q()) throw ArgumentError("guess index out of range");
  s.check_range(atoms.n_y);
  Matrix w = Matrix::Zero(atoms.n_x, atoms.n_x);
  for (auto j : s) w += atoms.atoms[kappa][j];
  return w;
}

Matrix lifted_output_jacobian(const MeasurementMatrix& c, const SensorSet& s,
                              const SensitivityStack& stack) {
  s.check_range(static_cast<std::size_t>(c.num_sensors()));
  const auto n = c.num_states();
  const auto m = static_cast<Eigen::Index>(s.size());
  Matrix c_sel(m, n);
  Eigen::Index r = 0;
  for (auto j : s) c_sel.row(r++) = c.row(static_cast<Eigen::Index>(j));
  Matrix jg(static_cast<Eigen::Index>(stack.size()) * m, n);
  for (std::size_t i = 0; i < stack.size(); ++i) {
    jg.middleRows(static_cast<Eigen::Index>(i) * m, m) = c_sel * stack.xis[i];
  }
  return jg;
}

std::vector<Matrix> single_guess_atoms(const ModelSpec& model, const MeasurementMatrix& c,
                                       const Vector& guess, std::size_t N, const IrkConfig& cfg) {
  const Trajectory traj = simulate(model, guess, N, cfg);
  return build_atoms(c, propagate_sensitivities(model, traj, cfg));
}

namespace {

GramianAtoms make_collection(const MeasurementMatrix& c, std::size_t N,
                             std::vector<std::vector<Matrix>> atoms) {
  GramianAtoms out;
  out.atoms = std::move(atoms);
  out.N = N;
  out.n_x = c.num_states();
  out.n_y = static_cast<std::size_t>(c.num_sensors());
  return out;
}

void check_guesses(const ModelSpec& model, const MeasurementMatrix& c,
                   const std::vector<Vector>& guesses) {
  if (guesses.empty()) throw ArgumentError("at least one presumed initial state is required");
  if (c.num_states() != model.n_x()) throw ArgumentError("measurement matrix does not match model");
}

[[noreturn]] void rethrow_for_guess(std::size_t kappa, const std::exception_ptr& err) {
  try {
    std::rethrow_exception(err);
  } catch (const IntegrationError& e) {
    throw IntegrationError("guess " + std::to_string(kappa + 1) + ": " + e.what(), e.step(),
                           e.residual());
  } catch (const NumericalError& e) {
    throw NumericalError("guess " + std::to_string(kappa + 1) + ": " + e.what());
  }
}

}  // namespace

GramianAtoms averaged_gramian_collection(const ModelSpec& model, const MeasurementMatrix& c,
                                         const std::vector<Vector>& guesses, std::size_t N,
                                         const IrkConfig& cfg) {
  check_guesses(model, c, guesses);
  cfg.validate();
  const auto q = static_cast<long>(guesses.size());
  std::vector<std::vector<Matrix>> atoms(guesses.size());
  std::vector<std::exception_ptr> errors(guesses.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < q; ++k) {
    try {
      atoms[k] = single_guess_atoms(model, c, guesses[k], N, cfg);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (errors[k]) rethrow_for_guess(k, errors[k]);
  }
  return make_collection(c, N, std::move(atoms));
}

CollectionOutcome try_averaged_gramian_collection(const ModelSpec& model, const MeasurementMatrix& c,
                                                  const std::vector<Vector>& guesses, std::size_t N,
                                                  const IrkConfig& cfg) {
  check_guesses(model, c, guesses);
  cfg.validate();
  const auto q = static_cast<long>(guesses.size());
  std::vector<std::vector<Matrix>> atoms(guesses.size());
  std::vector<std::string> errors(guesses.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < q; ++k) {
    try {
      atoms[k] = single_guess_atoms(model, c, guesses[k], N, cfg);
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  CollectionOutcome out;
  std::vector<std::vector<Matrix>> kept_atoms;
  for (std::size_t k = 0; k < guesses.size(); ++k) {
    if (errors[k].empty()) {
      out.kept.push_back(k);
      kept_atoms.push_back(std::move(atoms[k]));
    } else {
      out.failures.push_back({k, errors[k]});
    }
  }
  out.atoms = make_collection(c, N, std::move(kept_atoms));
  return out;
}

Eigen::Index numerical_rank(const Matrix& w, double rel_tol) {
  if (w.size() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double top = ev.maxCoeff();
  if (!(top > 0.0)) return 0;
  return (ev.array() > rel_tol * top).count();
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(path + ": ragged matrix row " + std::to_string(rows.size() + 1));
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

void export_atoms(const std::string& dir, const GramianAtoms& atoms) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < atoms.q(); ++k) {
    for (std::size_t j = 0; j < atoms.n_y; ++j) {
      const auto name = "atom_g" + std::to_string(k + 1) + "_s" + std::to_string(j + 1) + ".csv";
      write_matrix_csv((std::filesystem::path(dir) / name).string(), atoms.atom(k, j));
    }
  }
}

namespace reference {

GramianAtoms averaged_gramian_collection_serial(const ModelSpec& model, const MeasurementMatrix& c,
                                                const std::vector<Vector>& guesses, std::size_t N,
                                                const IrkConfig& cfg) {
  check_guesses(model, c, guesses);
  cfg.validate();
  std::vector<std::vector<Matrix>> atoms;
  for (std::size_t k = 0; k < guesses.size(); ++k) {
    try {
      atoms.push_back(single_guess_atoms(model, c, guesses[k], N, cfg));
    } catch (...) {
      rethrow_for_guess(k, std::current_exception());
    }
  }
  return make_collection(c, N, std::move(atoms));
}

}  // namespace reference

}  // namespace obsel
