#pragma once

// Per-sensor Gramian atoms
//
//   G_j = sum_{i=0}^{N-1} xi_i^T c_j^T c_j xi_i
//
// so that the set Gramian W(S) = sum_{j in S} G_j for each presumed initial
// state. Atoms are computed once; every set query is a sum of atoms.

#include "obsel/integrator.hpp"
#include "obsel/model.hpp"
#include "obsel/sensitivity.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace obsel {

struct GramianAtoms {
  /// atoms[kappa][j], both 0-based.
  std::vector<std::vector<Matrix>> atoms;
  std::size_t N = 0;
  Eigen::Index n_x = 0;
  std::size_t n_y = 0;

  std::size_t q() const { return atoms.size(); }
  const Matrix& atom(std::size_t kappa, std::size_t j) const { return atoms.at(kappa).at(j); }

  /// Atoms of one guess only.
  GramianAtoms slice(std::size_t kappa) const;
};

/// Atoms of a single presumed initial state.
std::vector<Matrix> build_atoms(const MeasurementMatrix& c, const SensitivityStack& stack);

/// W^(kappa)(S); the empty set gives the zero matrix.
Matrix assemble(const GramianAtoms& atoms, std::size_t kappa, const SensorSet& s);

/// Explicit lifted Jacobian col{ C_S xi_i }, (N |S|) x n_x, time-major with
/// selected rows in ascending sensor order.
Matrix lifted_output_jacobian(const MeasurementMatrix& c, const SensorSet& s,
                              const SensitivityStack& stack);

/// Atoms around one presumed initial state (simulate + propagate + build).
std::vector<Matrix> single_guess_atoms(const ModelSpec& model, const MeasurementMatrix& c,
                                       const Vector& guess, std::size_t N, const IrkConfig& cfg);

/// Parallel over guesses. Throws IntegrationError naming the first failing guess.
GramianAtoms averaged_gramian_collection(const ModelSpec& model, const MeasurementMatrix& c,
                                         const std::vector<Vector>& guesses, std::size_t N,
                                         const IrkConfig& cfg);

struct GuessFailure {
  std::size_t guess = 0;  // 0-based
  std::string message;
};

struct CollectionOutcome {
  GramianAtoms atoms;  // surviving guesses only, in input order
  std::vector<std::size_t> kept;
  std::vector<GuessFailure> failures;
};

/// Like averaged_gramian_collection but records per-guess failures instead of throwing.
CollectionOutcome try_averaged_gramian_collection(const ModelSpec& model, const MeasurementMatrix& c,
                                                  const std::vector<Vector>& guesses, std::size_t N,
                                                  const IrkConfig& cfg);

/// Eigenvalues above rel_tol * max eigenvalue of a symmetric PSD matrix.
Eigen::Index numerical_rank(const Matrix& w, double rel_tol = 1e-12);

/// Row-major CSV, 17 significant digits.
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);
/// One file per atom: <dir>/atom_g<kappa>_s<j>.csv, 1-based indices.
void export_atoms(const std::string& dir, const GramianAtoms& atoms);

namespace reference {

/// Serial counterpart of averaged_gramian_collection.
GramianAtoms averaged_gramian_collection_serial(const ModelSpec& model, const MeasurementMatrix& c,
                                                const std::vector<Vector>& guesses, std::size_t N,
                                                const IrkConfig& cfg);

}  // namespace reference

}  // namespace obsel
