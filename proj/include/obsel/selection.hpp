#pragma once

// State-averaged observability set functions and their maximizers.
//
//   O(S) = (1/q) sum_kappa L(W^(kappa)(S)),  L in {trace, log det}
//
// Trace is modular, log det (regularized) is monotone submodular; the
// greedy maximizer is exact for the former and within (1 - 1/e) for the latter.

#include "obsel/gramian.hpp"
#include "obsel/model.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace obsel {

enum class MetricKind { Trace, LogDet };

struct Metric {
  MetricKind kind = MetricKind::Trace;
  /// Relative regularizer: log det(W + eps_hat I), eps_hat = eps * max(1, trace(W(V)) / n_x).
  double logdet_epsilon = 1e-10;

  static Metric trace() { return {MetricKind::Trace, 1e-10}; }
  static Metric logdet(double eps = 1e-10) { return {MetricKind::LogDet, eps}; }
};

std::string to_string(MetricKind kind);
MetricKind parse_metric_kind(const std::string& name);

enum class SelectionMethod { Greedy, Exhaustive, Random };
std::string to_string(SelectionMethod method);

struct GainRecord {
  std::size_t step = 0;  // 1-based greedy step
  std::size_t node = 0;  // 0-based sensor index
  double gain = 0.0;
};

struct SelectionResult {
  SensorSet chosen;
  std::vector<GainRecord> gains;
  /// NaN when the selection was not scored (random_select without atoms).
  double objective = 0.0;
  SelectionMethod method = SelectionMethod::Greedy;
  std::optional<std::uint64_t> seed;
  Metric metric;
};

/// Evaluates O(S) for a fixed atom collection; caches the per-guess regularizers.
class MetricEvaluator {
 public:
  MetricEvaluator(const GramianAtoms& atoms, Metric metric);

  double operator()(const SensorSet& s) const;
  /// L(W^(kappa)(S)) for one guess.
  double single(std::size_t kappa, const SensorSet& s) const;
  double regularizer(std::size_t kappa) const { return eps_hat_.at(kappa); }

  const GramianAtoms& atoms() const { return *atoms_; }
  const Metric& metric() const { return metric_; }

 private:
  const GramianAtoms* atoms_;
  Metric metric_;
  std::vector<double> eps_hat_;
};

double metric_eval(const GramianAtoms& atoms, const SensorSet& s, const Metric& m);

/// log det of a symmetric positive definite matrix; -inf when not PD.
double log_det_spd(const Matrix& a);

/// Algorithm: r rounds, each adding the argmax of O(S + a) - O(S) over the
/// remaining nodes (lowest index wins ties). Candidates are scored in parallel.
SelectionResult greedy_select(const GramianAtoms& atoms, std::size_t r, const Metric& m);

/// Global maximizer by enumeration; lexicographically smallest set wins ties.
/// Throws CapacityError beyond max_subsets subsets.
SelectionResult exhaustive_select(const GramianAtoms& atoms, std::size_t r, const Metric& m,
                                  std::uint64_t max_subsets = 1'000'000);

/// Uniform random r-subset of {0..n_y-1}; reproducible per seed. objective is NaN.
SelectionResult random_select(std::size_t n_y, std::size_t r, std::uint64_t seed);

/// Random subset scored against atoms.
SelectionResult random_select(const GramianAtoms& atoms, std::size_t r, const Metric& m,
                              std::uint64_t seed);

struct BoundReport {
  /// (O* - O(S)) / (O* - O(empty)); empty when O* == O(empty).
  std::optional<double> ratio;
  double bound = 0.0;  // ((r-1)/r)^r
  double gap = 0.0;    // O* - O(S)
  bool satisfied = false;
};

BoundReport greedy_bound_check(const SelectionResult& greedy, const SelectionResult& opt,
                               double empty_value);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// JSON document: chosen (1-based), gains, objective, method, seed, metric, epsilon.
std::string to_json(const SelectionResult& result);
/// "1,3" style 1-based list.
std::string format_sensor_list(const SensorSet& s);
SensorSet parse_sensor_list(const std::string& text, std::size_t n_y);

namespace reference {

/// Serial counterpart of greedy_select.
SelectionResult greedy_select_serial(const GramianAtoms& atoms, std::size_t r, const Metric& m);

}  // namespace reference

}  // namespace obsel
