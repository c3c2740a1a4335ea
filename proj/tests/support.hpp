#pragma once

#include "obsel/gramian.hpp"
#include "obsel/kinetics.hpp"
#include "obsel/model.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace obsel::testing {

inline std::string data_path(const std::string& rel) { return std::string(OBSEL_DATA_DIR) + "/" + rel; }

inline kinetics::ReactionNetwork bundled_network() {
  return kinetics::load_network(data_path("networks/benchmark6.json"));
}

inline const Vector& bundled_state() {
  static const Vector x = (Vector(6) << 2.0, 1.5, 0.5, 0.2, 0.1, 0.3).finished();
  return x;
}

// Atoms G = B^T B with B a random k x n_x block, k in [1, max_rank].
inline GramianAtoms random_atoms(std::uint64_t seed, std::size_t q, std::size_t n_y, Eigen::Index n_x,
                                 Eigen::Index max_rank = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<Eigen::Index> rank(1, max_rank);
  GramianAtoms out;
  out.N = 1;
  out.n_x = n_x;
  out.n_y = n_y;
  out.atoms.resize(q);
  for (auto& per_guess : out.atoms) {
    for (std::size_t j = 0; j < n_y; ++j) {
      Matrix b(rank(rng), n_x);
      for (Eigen::Index r = 0; r < b.rows(); ++r) {
        for (Eigen::Index c = 0; c < n_x; ++c) b(r, c) = gauss(rng);
      }
      per_guess.push_back(b.transpose() * b);
    }
  }
  return out;
}

inline SensorSet from_mask(unsigned mask, std::size_t n) {
  std::vector<std::size_t> m;
  for (std::size_t j = 0; j < n; ++j) {
    if (mask >> j & 1u) m.push_back(j);
  }
  return SensorSet(std::move(m));
}

}  // namespace obsel::testing
