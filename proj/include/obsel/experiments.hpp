#pragma once

// Experiment pipelines on reaction networks: selection robustness against
// perturbed initial guesses, per-step observability gains, and initial-state
// estimation error of optimal versus random sensor placements.

#include "obsel/estimation.hpp"
#include "obsel/gramian.hpp"
#include "obsel/integrator.hpp"
#include "obsel/kinetics.hpp"
#include "obsel/selection.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace obsel {

struct ExperimentConfig {
  /// Path of the network document, or empty when the network is inline.
  std::string network;
  std::optional<kinetics::ReactionNetwork> network_data;

  Vector x_true;
  double T = 1e-3;
  std::size_t N = 200;
  std::size_t q = 10;
  double p = 1.0;
  std::optional<std::size_t> r;
  std::vector<double> sensor_fraction;
  Metric metric = Metric::logdet();
  std::uint64_t seed = 1;
  std::size_t num_random_configs = 200;
  std::string output_dir = "out";

  /// Extra seeds used to re-check the averaged selection.
  std::size_t stability_seeds = 4;
  /// Estimation starts from x_true + d, |d|_2 <= guess_spread |x_true|_2.
  double guess_spread = 0.05;
  SolverOptions solver;
  IrkConfig irk;

  const kinetics::ReactionNetwork& net() const;
  std::size_t n_y() const;
  /// r if set, otherwise n_y.
  std::size_t selection_size() const;
  /// sensor_fraction if set, otherwise r / n_y.
  std::vector<double> fractions() const;
  void validate() const;
};

/// Accepts either an experiment document (with a "network" path or inline
/// object) or a bare network document carrying experiment fields alongside.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_experiment_config(const std::string& path);

/// q guesses x_ref + d, d_i ~ U[0, p] independently; optionally clamped at 0.
std::vector<Vector> sample_perturbed_guesses(const Vector& x_ref, double p, std::size_t q,
                                             std::uint64_t seed, bool clamp_nonnegative = true);

/// Estimation start point used by the estimation experiment.
Vector estimation_start(const ExperimentConfig& cfg);

/// Number of sensors for a fraction of n_y (rounded, at least 1).
std::size_t sensors_for_fraction(double fraction, std::size_t n_y);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

struct ExperimentContext {
  ModelSpec model;
  std::vector<Vector> guesses;
  CollectionOutcome collection;
};

/// Builds the model, samples guesses with `seed` and computes atoms. Throws
/// IntegrationError when failures leave fewer than two surviving guesses.
ExperimentContext prepare_experiment(const ExperimentConfig& cfg, std::uint64_t seed);

struct SelectionRow {
  MetricKind metric;
  std::size_t r;
  std::optional<std::size_t> guess;  // empty for the averaged metric
  SensorSet chosen;
  double objective;
};

struct SelectionDiffRow {
  MetricKind metric;
  std::size_t r;
  std::size_t guess;
  std::vector<std::size_t> added;    // in the single-guess set only
  std::vector<std::size_t> removed;  // in the averaged set only
};

struct StabilityRow {
  MetricKind metric;
  std::size_t r;
  std::uint64_t seed;
  SensorSet chosen;
  bool matches;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::vector<SelectionDiffRow> diffs;
  std::vector<StabilityRow> stability;
  std::vector<GuessFailure> failures;
  bool stable = true;
};

SelectionReport run_selection_experiment(const ExperimentConfig& cfg);

struct GainRow {
  std::size_t step;
  MetricKind metric;
  double avg_gain;
  double single_mean;
  double single_min;
  double single_max;
};

struct GainReport {
  std::vector<GainRow> rows;
  std::vector<GuessFailure> failures;
};

GainReport run_gain_experiment(const ExperimentConfig& cfg);

struct EstimationRow {
  double fraction;
  std::size_t r;
  std::string method;  // greedy-trace, greedy-logdet, random
  std::optional<std::uint64_t> seed;
  SensorSet chosen;
  double relative_error;
  bool converged;
  int iterations;
  double objective;
  std::string error;  // non-empty when the solve failed
};

struct EstimationSummaryRow {
  double fraction;
  std::size_t r;
  std::string method;
  double relative_error;
  double random_min;
  double random_median;
  bool optimal;  // relative_error <= random_min + 1e-9
};

struct EstimationReport {
  std::vector<EstimationRow> rows;
  std::vector<EstimationSummaryRow> summary;
  std::vector<GuessFailure> failures;
};

EstimationReport run_estimation_experiment(const ExperimentConfig& cfg);

/// Noiseless lifted measurements of x_true through sensors s.
Vector synthesize_measurements(const ModelSpec& model, const SensorSet& s, const Vector& x_true,
                               std::size_t N, const IrkConfig& cfg);

// CSV writers; headers are fixed and documented in README.
std::string selection_csv(const SelectionReport& rep);
std::string selection_diff_csv(const SelectionReport& rep);
std::string selection_stability_csv(const SelectionReport& rep);
std::string gain_csv(const GainReport& rep);
std::string estimation_csv(const EstimationReport& rep);
std::string estimation_summary_csv(const EstimationReport& rep);
std::string failures_csv(const std::vector<GuessFailure>& failures);
std::string trajectory_csv(const Trajectory& traj, double T, const std::vector<std::string>& names);

/// Runs all three pipelines and writes their reports into dir. Returns the file names written.
std::vector<std::string> run_all_experiments(const ExperimentConfig& cfg, const std::string& dir);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace obsel
