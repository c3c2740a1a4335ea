#pragma once

// Mass-action reaction networks
//
//   sum_i q_ji R_i  <=>  sum_i w_ji R_i,   j = 1..N_r
//
// with dynamics x' = Theta psi(x), Theta = [w_ji - q_ji]^T and
// psi_j(x) = v_j prod_i x_i^q_ji - b_j prod_i x_i^w_ji.

#include "obsel/model.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace obsel::kinetics {

class ReactionNetwork {
 public:
  /// q, w: N_r x n_x stoichiometric coefficients; v, b: forward/backward rates.
  ReactionNetwork(std::vector<std::string> species, Matrix q, Matrix w, Vector v, Vector b,
                  std::optional<MeasurementMatrix> measurement = std::nullopt);

  Eigen::Index num_species() const { return q_.cols(); }
  Eigen::Index num_reactions() const { return q_.rows(); }

  const std::vector<std::string>& species() const { return species_; }
  const Matrix& forward_coefficients() const { return q_; }
  const Matrix& backward_coefficients() const { return w_; }
  const Vector& forward_rates() const { return v_; }
  const Vector& backward_rates() const { return b_; }
  /// n_x x N_r net stoichiometry, theta(i,j) = w(j,i) - q(j,i).
  const Matrix& theta() const { return theta_; }
  /// Defaults to identity: every species is a candidate sensor node.
  const MeasurementMatrix& measurement() const { return measurement_; }

  bool has_integer_exponents() const;

  friend bool operator==(const ReactionNetwork& a, const ReactionNetwork& b);

 private:
  std::vector<std::string> species_;
  Matrix q_;
  Matrix w_;
  Vector v_;
  Vector b_;
  Matrix theta_;
  MeasurementMatrix measurement_;
};

Vector rate_vector(const ReactionNetwork& net, const Vector& x);
Vector kinetics_dynamics(const ReactionNetwork& net, const Vector& x);
Matrix kinetics_jacobian(const ReactionNetwork& net, const Vector& x);

ModelSpec to_model(const ReactionNetwork& net);

/// Parses the JSON network document (species, reactions[{q,w,v,b}], measurement).
ReactionNetwork parse_network(std::string_view text);
ReactionNetwork load_network(const std::string& path);
std::string serialize_network(const ReactionNetwork& net);

/// Basis for the left null space of Theta (rows m with m^T Theta = 0).
Matrix conservation_laws(const ReactionNetwork& net, double tol = 1e-12);

}  // namespace obsel::kinetics
