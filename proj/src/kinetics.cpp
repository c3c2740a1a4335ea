#include "obsel/kinetics.hpp"

#include "obsel/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

namespace obsel::kinetics {

using nlohmann::json;

namespace {

bool is_integer(double e) { return std::floor(e) == e; }

// x^e with 0^0 = 1. Integer exponents use exact repeated multiplication.
double power(double x, double e) {
  if (e == 0.0) return 1.0;
  if (is_integer(e) && e <= 64.0) {
    double r = 1.0;
    for (int k = 0; k < static_cast<int>(e); ++k) r *= x;
    return r;
  }
  if (x < 0.0) {
    throw DomainError("negative concentration raised to non-integer stoichiometric exponent");
  }
  return std::pow(x, e);
}

double monomial(const Matrix& coeff, Eigen::Index j, const Vector& x) {
  double m = 1.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) m *= power(x[i], coeff(j, i));
  return m;
}

// d/dx_i of prod_l x_l^e_l. A zero exponent contributes no term.
double monomial_derivative(const Matrix& coeff, Eigen::Index j, Eigen::Index i, const Vector& x) {
  const double e = coeff(j, i);
  if (e == 0.0) return 0.0;
  if (x[i] == 0.0 && e < 1.0) {
    throw DomainError("jacobian undefined at zero concentration for exponent in (0,1)");
  }
  double d = e * power(x[i], e - 1.0);
  for (Eigen::Index l = 0; l < x.size(); ++l) {
    if (l != i) d *= power(x[l], coeff(j, l));
  }
  return d;
}

void check_state(const ReactionNetwork& net, const Vector& x) {
  if (x.size() != net.num_species()) {
    throw ArgumentError("state has length " + std::to_string(x.size()) + ", network has " +
                        std::to_string(net.num_species()) + " species");
  }
}

MeasurementMatrix default_measurement(std::optional<MeasurementMatrix> m, Eigen::Index n) {
  if (m) return std::move(*m);
  return MeasurementMatrix::identity(n);
}

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ParseError(field + ": " + msg);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where.empty() ? key : where + "." + key, "missing field");
  return *it;
}

double read_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  return v.get<double>();
}

Vector read_coefficients(const json& v, std::size_t n, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of integers");
  if (v.size() != n) {
    fail(where, "has " + std::to_string(v.size()) + " entries, expected " + std::to_string(n));
  }
  Vector out(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = v[i];
    if (!e.is_number_integer()) fail(where + "[" + std::to_string(i) + "]", "expected an integer");
    const auto k = e.get<long long>();
    if (k < 0) fail(where + "[" + std::to_string(i) + "]", "negative stoichiometric coefficient");
    out[static_cast<Eigen::Index>(i)] = static_cast<double>(k);
  }
  return out;
}

}  // namespace

ReactionNetwork::ReactionNetwork(std::vector<std::string> species, Matrix q, Matrix w, Vector v,
                                 Vector b, std::optional<MeasurementMatrix> measurement)
    : species_(std::move(species)),
      q_(std::move(q)),
      w_(std::move(w)),
      v_(std::move(v)),
      b_(std::move(b)),
      measurement_(default_measurement(std::move(measurement), q_.cols())) {
  const auto n_x = q_.cols();
  const auto n_r = q_.rows();
  if (n_x < 1 || n_r < 1) throw ArgumentError("network needs at least one species and one reaction");
  if (static_cast<Eigen::Index>(species_.size()) != n_x) {
    throw ArgumentError("species name count does not match coefficient columns");
  }
  if (w_.rows() != n_r || w_.cols() != n_x) throw ArgumentError("q and w shapes differ");
  if (v_.size() != n_r || b_.size() != n_r) throw ArgumentError("rate vector length mismatch");
  if ((q_.array() < 0.0).any() || (w_.array() < 0.0).any()) {
    throw ArgumentError("negative stoichiometric coefficient");
  }
  if ((v_.array() < 0.0).any() || (b_.array() < 0.0).any()) throw ArgumentError("negative rate");
  if (!q_.allFinite() || !w_.allFinite() || !v_.allFinite() || !b_.allFinite()) {
    throw ArgumentError("non-finite network data");
  }
  for (Eigen::Index j = 0; j < n_r; ++j) {
    if ((q_.row(j).array() == 0.0).all() && (w_.row(j).array() == 0.0).all()) {
      throw ArgumentError("reaction " + std::to_string(j + 1) + " has no nonzero coefficient");
    }
  }
  if (measurement_.num_states() != n_x) {
    throw ArgumentError("measurement matrix column count does not match species count");
  }
  theta_ = (w_ - q_).transpose();
}

bool ReactionNetwork::has_integer_exponents() const {
  return q_.unaryExpr([](double e) { return is_integer(e) ? 0.0 : 1.0; }).sum() == 0.0 &&
         w_.unaryExpr([](double e) { return is_integer(e) ? 0.0 : 1.0; }).sum() == 0.0;
}

bool operator==(const ReactionNetwork& a, const ReactionNetwork& b) {
  return a.species_ == b.species_ && a.q_ == b.q_ && a.w_ == b.w_ && a.v_ == b.v_ &&
         a.b_ == b.b_ && a.measurement_.matrix() == b.measurement_.matrix();
}

Vector rate_vector(const ReactionNetwork& net, const Vector& x) {
  check_state(net, x);
  const auto& q = net.forward_coefficients();
  const auto& w = net.backward_coefficients();
  Vector psi(net.num_reactions());
  for (Eigen::Index j = 0; j < psi.size(); ++j) {
    psi[j] = net.forward_rates()[j] * monomial(q, j, x) - net.backward_rates()[j] * monomial(w, j, x);
  }
  return psi;
}

Vector kinetics_dynamics(const ReactionNetwork& net, const Vector& x) {
  return net.theta() * rate_vector(net, x);
}

Matrix kinetics_jacobian(const ReactionNetwork& net, const Vector& x) {
  check_state(net, x);
  const auto n_x = net.num_species();
  const auto n_r = net.num_reactions();
  const auto& q = net.forward_coefficients();
  const auto& w = net.backward_coefficients();
  Matrix dpsi(n_r, n_x);
  for (Eigen::Index j = 0; j < n_r; ++j) {
    for (Eigen::Index i = 0; i < n_x; ++i) {
      dpsi(j, i) = net.forward_rates()[j] * monomial_derivative(q, j, i, x) -
                   net.backward_rates()[j] * monomial_derivative(w, j, i, x);
    }
  }
  return net.theta() * dpsi;
}

ModelSpec to_model(const ReactionNetwork& net) {
  return ModelSpec(
      net.num_species(), [net](const Vector& x) { return kinetics_dynamics(net, x); },
      [net](const Vector& x) { return kinetics_jacobian(net, x); }, net.measurement());
}

ReactionNetwork parse_network(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("network document: ") + e.what());
  }
  if (!doc.is_object()) fail("network document", "expected an object");

  const auto& species_j = require(doc, "species", "");
  if (!species_j.is_array() || species_j.empty()) fail("species", "expected a non-empty array of names");
  std::vector<std::string> species;
  for (std::size_t i = 0; i < species_j.size(); ++i) {
    if (!species_j[i].is_string()) fail("species[" + std::to_string(i) + "]", "expected a string");
    species.push_back(species_j[i].get<std::string>());
  }
  const std::size_t n_x = species.size();

  const auto& reactions = require(doc, "reactions", "");
  if (!reactions.is_array() || reactions.empty()) fail("reactions", "expected a non-empty array");
  const auto n_r = static_cast<Eigen::Index>(reactions.size());
  Matrix q(n_r, static_cast<Eigen::Index>(n_x));
  Matrix w(n_r, static_cast<Eigen::Index>(n_x));
  Vector v(n_r);
  Vector b(n_r);
  for (Eigen::Index j = 0; j < n_r; ++j) {
    const std::string where = "reactions[" + std::to_string(j) + "]";
    const auto& r = reactions[static_cast<std::size_t>(j)];
    if (!r.is_object()) fail(where, "expected an object");
    q.row(j) = read_coefficients(require(r, "q", where), n_x, where + ".q").transpose();
    w.row(j) = read_coefficients(require(r, "w", where), n_x, where + ".w").transpose();
    v[j] = read_number(require(r, "v", where), where + ".v");
    b[j] = read_number(require(r, "b", where), where + ".b");
    if (v[j] < 0.0) fail(where + ".v", "negative rate");
    if (b[j] < 0.0) fail(where + ".b", "negative rate");
    if (!std::isfinite(v[j]) || !std::isfinite(b[j])) fail(where, "non-finite rate");
    if ((q.row(j).array() == 0.0).all() && (w.row(j).array() == 0.0).all()) {
      fail(where, "reaction has no nonzero coefficient");
    }
  }

  std::optional<MeasurementMatrix> measurement;
  if (auto it = doc.find("measurement"); it != doc.end()) {
    if (!it->is_array() || it->empty()) fail("measurement", "expected a non-empty array of rows");
    Matrix c(static_cast<Eigen::Index>(it->size()), static_cast<Eigen::Index>(n_x));
    for (std::size_t r = 0; r < it->size(); ++r) {
      const std::string where = "measurement[" + std::to_string(r) + "]";
      const auto& row = (*it)[r];
      if (!row.is_array() || row.size() != n_x) {
        fail(where, "expected " + std::to_string(n_x) + " entries");
      }
      for (std::size_t i = 0; i < n_x; ++i) {
        c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
            read_number(row[i], where + "[" + std::to_string(i) + "]");
      }
    }
    try {
      measurement.emplace(std::move(c));
    } catch (const ArgumentError& e) {
      fail("measurement", e.what());
    }
  }
  return ReactionNetwork(std::move(species), std::move(q), std::move(w), std::move(v), std::move(b),
                         std::move(measurement));
}

ReactionNetwork load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_network(ss.str());
}

std::string serialize_network(const ReactionNetwork& net) {
  json doc;
  doc["species"] = net.species();
  json reactions = json::array();
  for (Eigen::Index j = 0; j < net.num_reactions(); ++j) {
    json r;
    std::vector<long long> q;
    std::vector<long long> w;
    for (Eigen::Index i = 0; i < net.num_species(); ++i) {
      q.push_back(static_cast<long long>(net.forward_coefficients()(j, i)));
      w.push_back(static_cast<long long>(net.backward_coefficients()(j, i)));
    }
    r["q"] = q;
    r["w"] = w;
    r["v"] = net.forward_rates()[j];
    r["b"] = net.backward_rates()[j];
    reactions.push_back(std::move(r));
  }
  doc["reactions"] = std::move(reactions);
  const auto& c = net.measurement().matrix();
  json rows = json::array();
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index i = 0; i < c.cols(); ++i) row.push_back(c(r, i));
    rows.push_back(row);
  }
  doc["measurement"] = std::move(rows);
  return doc.dump(2) + "\n";
}

Matrix conservation_laws(const ReactionNetwork& net, double tol) {
  // Left null space of theta via SVD of theta^T.
  const Matrix tt = net.theta().transpose();
  Eigen::JacobiSVD<Matrix> svd(tt, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s[k] > tol * std::max(1.0, smax)) ++rank;
  }
  const Eigen::Index n = net.num_species();
  return svd.matrixV().rightCols(n - rank).transpose();
}

}  // namespace obsel::kinetics
