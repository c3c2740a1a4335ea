#include "obsel/experiments.hpp"

#include "obsel/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace obsel {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string joined(const std::vector<std::size_t>& zero_based) {
  std::string out;
  for (auto j : zero_based) {
    if (!out.empty()) out += ' ';
    out += std::to_string(j + 1);
  }
  return out;
}

std::string joined(const SensorSet& s) { return joined(s.members()); }

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ParseError(field + ": " + msg);
}

double get_number(const json& doc, const char* key, double fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number()) fail(key, "expected a number");
  return it->get<double>();
}

std::size_t get_count(const json& doc, const char* key, std::size_t fallback) {
  auto it = doc.find(key);
  if (it == doc.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0) fail(key, "expected a nonnegative integer");
  return static_cast<std::size_t>(it->get<long long>());
}

Vector get_vector(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(where + "[" + std::to_string(i) + "]", "expected a number");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const std::vector<MetricKind> kBothMetrics{MetricKind::Trace, MetricKind::LogDet};

Metric metric_of(const ExperimentConfig& cfg, MetricKind kind) {
  return Metric{kind, cfg.metric.logdet_epsilon};
}

}  // namespace

const kinetics::ReactionNetwork& ExperimentConfig::net() const {
  if (!network_data) throw ArgumentError("experiment config has no network");
  return *network_data;
}

std::size_t ExperimentConfig::n_y() const {
  return static_cast<std::size_t>(net().measurement().num_sensors());
}

std::size_t ExperimentConfig::selection_size() const { return r.value_or(n_y()); }

std::vector<double> ExperimentConfig::fractions() const {
  if (!sensor_fraction.empty()) return sensor_fraction;
  return {static_cast<double>(selection_size()) / static_cast<double>(n_y())};
}

void ExperimentConfig::validate() const {
  const auto& nw = net();
  if (x_true.size() != nw.num_species()) {
    throw ArgumentError("x_true has length " + std::to_string(x_true.size()) + ", network has " +
                        std::to_string(nw.num_species()) + " species");
  }
  if (!x_true.allFinite()) throw ArgumentError("x_true contains non-finite entries");
  irk.validate();
  if (N < 1) throw ArgumentError("N must be at least 1");
  if (q < 1) throw ArgumentError("q must be at least 1");
  if (!(p >= 0.0)) throw ArgumentError("p must be nonnegative");
  if (r && (*r < 1 || *r > n_y())) {
    throw ArgumentError("r must lie in 1.." + std::to_string(n_y()));
  }
  for (double f : sensor_fraction) {
    if (!(f > 0.0 && f <= 1.0)) throw ArgumentError("sensor_fraction entries must lie in (0, 1]");
  }
  if (!(metric.logdet_epsilon >= 0.0)) throw ArgumentError("logdet_epsilon must be nonnegative");
  if (!(guess_spread >= 0.0)) throw ArgumentError("guess_spread must be nonnegative");
  if (solver.max_iterations < 1) throw ArgumentError("solver max_iterations must be positive");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config document: ") + e.what());
  }
  if (!doc.is_object()) fail("config document", "expected an object");

  ExperimentConfig cfg;
  if (auto it = doc.find("network"); it != doc.end()) {
    if (it->is_string()) {
      fs::path path(it->get<std::string>());
      if (path.is_relative()) path = fs::path(base_dir) / path;
      cfg.network = path.lexically_normal().string();
      cfg.network_data = kinetics::load_network(cfg.network);
    } else if (it->is_object()) {
      cfg.network_data = kinetics::parse_network(it->dump());
    } else {
      fail("network", "expected a path or an inline network object");
    }
  } else if (doc.contains("species")) {
    cfg.network_data = kinetics::parse_network(text);
  } else {
    fail("network", "missing field");
  }

  if (auto it = doc.find("x_true"); it != doc.end()) cfg.x_true = get_vector(*it, "x_true");
  cfg.T = get_number(doc, "T", cfg.T);
  cfg.irk.T = cfg.T;
  cfg.N = get_count(doc, "N", cfg.N);
  cfg.q = get_count(doc, "q", cfg.q);
  cfg.p = get_number(doc, "p", cfg.p);
  if (doc.contains("r")) cfg.r = get_count(doc, "r", 0);
  if (auto it = doc.find("sensor_fraction"); it != doc.end()) {
    if (it->is_number()) {
      cfg.sensor_fraction = {it->get<double>()};
    } else {
      const Vector f = get_vector(*it, "sensor_fraction");
      cfg.sensor_fraction.assign(f.data(), f.data() + f.size());
    }
  }
  if (auto it = doc.find("metric"); it != doc.end()) {
    if (!it->is_string()) fail("metric", "expected \"trace\" or \"logdet\"");
    try {
      cfg.metric.kind = parse_metric_kind(it->get<std::string>());
    } catch (const ArgumentError& e) {
      fail("metric", e.what());
    }
  }
  cfg.metric.logdet_epsilon = get_number(doc, "logdet_epsilon", cfg.metric.logdet_epsilon);
  cfg.seed = get_count(doc, "seed", cfg.seed);
  cfg.num_random_configs = get_count(doc, "num_random_configs", cfg.num_random_configs);
  if (auto it = doc.find("output_dir"); it != doc.end()) {
    if (!it->is_string()) fail("output_dir", "expected a string");
    cfg.output_dir = it->get<std::string>();
  }
  cfg.stability_seeds = get_count(doc, "stability_seeds", cfg.stability_seeds);
  cfg.guess_spread = get_number(doc, "guess_spread", cfg.guess_spread);
  cfg.irk.newton_tol = get_number(doc, "newton_tol", cfg.irk.newton_tol);
  cfg.irk.newton_max_iters = static_cast<int>(get_count(doc, "newton_max_iters", 50));
  if (auto it = doc.find("solver"); it != doc.end()) {
    if (!it->is_object()) fail("solver", "expected an object");
    cfg.solver.gtol = get_number(*it, "gtol", cfg.solver.gtol);
    cfg.solver.xtol = get_number(*it, "xtol", cfg.solver.xtol);
    cfg.solver.max_iterations =
        static_cast<int>(get_count(*it, "max_iterations", static_cast<std::size_t>(cfg.solver.max_iterations)));
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = fs::path(path).parent_path();
  return parse_experiment_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a simple combination
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<Vector> sample_perturbed_guesses(const Vector& x_ref, double p, std::size_t q,
                                             std::uint64_t seed, bool clamp_nonnegative) {
  if (!(p >= 0.0)) throw ArgumentError("perturbation magnitude p must be nonnegative");
  if (q < 1) throw ArgumentError("q must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, p);
  std::vector<Vector> out;
  out.reserve(q);
  for (std::size_t k = 0; k < q; ++k) {
    Vector g = x_ref;
    if (p > 0.0) {
      for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += u(rng);
    }
    if (clamp_nonnegative) g = g.cwiseMax(0.0);
    out.push_back(std::move(g));
  }
  return out;
}

Vector estimation_start(const ExperimentConfig& cfg) {
  const auto n = cfg.x_true.size();
  const double a = cfg.guess_spread * cfg.x_true.norm() / std::sqrt(static_cast<double>(n));
  std::mt19937_64 rng(derive_seed(cfg.seed, 7));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector start(n);
  for (Eigen::Index i = 0; i < n; ++i) start[i] = std::max(0.0, cfg.x_true[i] + a * u(rng));
  return start;
}

std::size_t sensors_for_fraction(double fraction, std::size_t n_y) {
  const auto r = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_y)));
  return std::clamp<std::size_t>(r, 1, n_y);
}

ExperimentContext prepare_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelSpec model = kinetics::to_model(cfg.net());
  auto guesses = sample_perturbed_guesses(cfg.x_true, cfg.p, cfg.q, seed);
  auto collection = try_averaged_gramian_collection(model, model.measurement(), guesses, cfg.N, cfg.irk);
  if (!collection.failures.empty() && collection.kept.size() < 2) {
    const auto& f = collection.failures.front();
    throw IntegrationError("only " + std::to_string(collection.kept.size()) +
                               " guesses survived integration; first failure at guess " +
                               std::to_string(f.guess + 1) + ": " + f.message,
                           0, std::numeric_limits<double>::quiet_NaN());
  }
  return ExperimentContext{std::move(model), std::move(guesses), std::move(collection)};
}

SelectionReport run_selection_experiment(const ExperimentConfig& cfg) {
  const ExperimentContext ctx = prepare_experiment(cfg, cfg.seed);
  const GramianAtoms& atoms = ctx.collection.atoms;
  const std::size_t n_y = atoms.n_y;

  SelectionReport rep;
  rep.failures = ctx.collection.failures;
  for (auto kind : kBothMetrics) {
    const Metric m = metric_of(cfg, kind);
    for (std::size_t r = 1; r <= n_y; ++r) {
      const SelectionResult avg = greedy_select(atoms, r, m);
      rep.rows.push_back({kind, r, std::nullopt, avg.chosen, avg.objective});
      for (std::size_t k = 0; k < atoms.q(); ++k) {
        const GramianAtoms one = atoms.slice(k);
        const SelectionResult single = greedy_select(one, r, m);
        const std::size_t guess = ctx.collection.kept[k];
        rep.rows.push_back({kind, r, guess, single.chosen, single.objective});
        SelectionDiffRow diff{kind, r, guess, {}, {}};
        for (auto j : single.chosen) {
          if (!avg.chosen.contains(j)) diff.added.push_back(j);
        }
        for (auto j : avg.chosen) {
          if (!single.chosen.contains(j)) diff.removed.push_back(j);
        }
        if (!diff.added.empty()) rep.diffs.push_back(std::move(diff));
      }
    }
  }

  for (std::size_t s = 0; s < cfg.stability_seeds; ++s) {
    const std::uint64_t seed = derive_seed(cfg.seed, 1000 + s);
    const ExperimentContext alt = prepare_experiment(cfg, seed);
    for (auto kind : kBothMetrics) {
      const Metric m = metric_of(cfg, kind);
      for (std::size_t r = 1; r <= n_y; ++r) {
        const SelectionResult sel = greedy_select(alt.collection.atoms, r, m);
        const auto primary = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const SelectionRow& row) {
          return row.metric == kind && row.r == r && !row.guess;
        });
        const bool match = primary->chosen == sel.chosen;
        rep.stable = rep.stable && match;
        rep.stability.push_back({kind, r, seed, sel.chosen, match});
      }
    }
  }
  return rep;
}

GainReport run_gain_experiment(const ExperimentConfig& cfg) {
  const ExperimentContext ctx = prepare_experiment(cfg, cfg.seed);
  const GramianAtoms& atoms = ctx.collection.atoms;
  const std::size_t r = cfg.selection_size();

  GainReport rep;
  rep.failures = ctx.collection.failures;
  for (auto kind : kBothMetrics) {
    const Metric m = metric_of(cfg, kind);
    const SelectionResult avg = greedy_select(atoms, r, m);
    std::vector<SelectionResult> singles;
    for (std::size_t k = 0; k < atoms.q(); ++k) singles.push_back(greedy_select(atoms.slice(k), r, m));
    for (std::size_t step = 0; step < r; ++step) {
      GainRow row{step + 1, kind, avg.gains[step].gain, 0.0, std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
      for (const auto& s : singles) {
        const double g = s.gains[step].gain;
        row.single_mean += g;
        row.single_min = std::min(row.single_min, g);
        row.single_max = std::max(row.single_max, g);
      }
      row.single_mean /= static_cast<double>(singles.size());
      rep.rows.push_back(row);
    }
  }
  return rep;
}

Vector synthesize_measurements(const ModelSpec& model, const SensorSet& s, const Vector& x_true,
                               std::size_t N, const IrkConfig& cfg) {
  return lifted_output(model, s, x_true, N, cfg);
}

EstimationReport run_estimation_experiment(const ExperimentConfig& cfg) {
  const ExperimentContext ctx = prepare_experiment(cfg, cfg.seed);
  const GramianAtoms& atoms = ctx.collection.atoms;
  const std::size_t n_y = atoms.n_y;
  const Vector start = estimation_start(cfg);
  const auto fractions = cfg.fractions();

  EstimationReport rep;
  rep.failures = ctx.collection.failures;

  struct Task {
    double fraction;
    std::size_t r;
    std::string method;
    std::optional<std::uint64_t> seed;
    SensorSet chosen;
  };
  std::vector<Task> tasks;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const std::size_t r = sensors_for_fraction(fractions[fi], n_y);
    for (auto kind : kBothMetrics) {
      const SelectionResult sel = greedy_select(atoms, r, metric_of(cfg, kind));
      tasks.push_back({fractions[fi], r, "greedy-" + to_string(kind), std::nullopt, sel.chosen});
    }
    for (std::size_t i = 0; i < cfg.num_random_configs; ++i) {
      const std::uint64_t seed = derive_seed(cfg.seed, 100 + fi, i);
      tasks.push_back({fractions[fi], r, "random", seed, random_select(n_y, r, seed).chosen});
    }
  }

  rep.rows.resize(tasks.size());
  const auto n_tasks = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < n_tasks; ++t) {
    const Task& task = tasks[t];
    EstimationRow row{task.fraction, task.r, task.method, task.seed, task.chosen,
                      std::numeric_limits<double>::quiet_NaN(), false, 0,
                      std::numeric_limits<double>::quiet_NaN(), {}};
    try {
      const Vector y = synthesize_measurements(ctx.model, task.chosen, cfg.x_true, cfg.N, cfg.irk);
      const auto prob = EstimationProblem::for_concentrations(ctx.model, task.chosen, y, start);
      const EstimationResult res = estimate_initial_state(prob, cfg.N, cfg.irk, cfg.solver);
      row.relative_error = relative_error(cfg.x_true, res.x_hat);
      row.converged = res.converged;
      row.iterations = res.iterations;
      row.objective = res.objective;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rep.rows[t] = std::move(row);
  }

  for (double f : fractions) {
    std::vector<double> random_errors;
    for (const auto& row : rep.rows) {
      if (row.fraction == f && row.method == "random") random_errors.push_back(row.relative_error);
    }
    double rmin = std::numeric_limits<double>::quiet_NaN();
    for (double e : random_errors) {
      if (!std::isnan(e) && (std::isnan(rmin) || e < rmin)) rmin = e;
    }
    const double rmed = median(random_errors);
    for (const auto& row : rep.rows) {
      if (row.fraction != f || row.method == "random") continue;
      const bool optimal = std::isnan(rmin) ? !std::isnan(row.relative_error)
                                            : row.relative_error <= rmin + 1e-9;
      rep.summary.push_back({f, row.r, row.method, row.relative_error, rmin, rmed, optimal});
    }
  }
  return rep;
}

std::string selection_csv(const SelectionReport& rep) {
  std::ostringstream out;
  out << "metric,r,source,guess,chosen,objective\n";
  for (const auto& row : rep.rows) {
    out << to_string(row.metric) << ',' << row.r << ',' << (row.guess ? "single" : "averaged") << ','
        << (row.guess ? std::to_string(*row.guess + 1) : "") << ',' << joined(row.chosen) << ','
        << num(row.objective) << '\n';
  }
  return out.str();
}

std::string selection_diff_csv(const SelectionReport& rep) {
  std::ostringstream out;
  out << "metric,r,guess,added,removed\n";
  for (const auto& d : rep.diffs) {
    out << to_string(d.metric) << ',' << d.r << ',' << d.guess + 1 << ',' << joined(d.added) << ','
        << joined(d.removed) << '\n';
  }
  return out.str();
}

std::string selection_stability_csv(const SelectionReport& rep) {
  std::ostringstream out;
  out << "metric,r,seed,chosen,matches_primary\n";
  for (const auto& s : rep.stability) {
    out << to_string(s.metric) << ',' << s.r << ',' << s.seed << ',' << joined(s.chosen) << ','
        << (s.matches ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string gain_csv(const GainReport& rep) {
  std::ostringstream out;
  out << "step,metric,avg_gain,single_mean,single_min,single_max\n";
  for (const auto& g : rep.rows) {
    out << g.step << ',' << to_string(g.metric) << ',' << num(g.avg_gain) << ',' << num(g.single_mean)
        << ',' << num(g.single_min) << ',' << num(g.single_max) << '\n';
  }
  return out.str();
}

std::string estimation_csv(const EstimationReport& rep) {
  std::ostringstream out;
  out << "fraction,r,method,seed,chosen,relative_error,converged,iterations,objective,error\n";
  for (const auto& row : rep.rows) {
    std::string err = row.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << num(row.fraction) << ',' << row.r << ',' << row.method << ','
        << (row.seed ? std::to_string(*row.seed) : "") << ',' << joined(row.chosen) << ','
        << num(row.relative_error) << ',' << (row.converged ? 1 : 0) << ',' << row.iterations << ','
        << num(row.objective) << ',' << err << '\n';
  }
  return out.str();
}

std::string estimation_summary_csv(const EstimationReport& rep) {
  std::ostringstream out;
  out << "fraction,r,method,relative_error,random_min,random_median,optimal\n";
  for (const auto& s : rep.summary) {
    out << num(s.fraction) << ',' << s.r << ',' << s.method << ',' << num(s.relative_error) << ','
        << num(s.random_min) << ',' << num(s.random_median) << ',' << (s.optimal ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string failures_csv(const std::vector<GuessFailure>& failures) {
  std::ostringstream out;
  out << "guess,message\n";
  for (const auto& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), ',', ';');
    out << f.guess + 1 << ',' << msg << '\n';
  }
  return out.str();
}

std::string trajectory_csv(const Trajectory& traj, double T, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "k,t";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << k << ',' << num(static_cast<double>(k) * T);
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) out << ',' << num(traj.states[k][i]);
    out << '\n';
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

std::vector<std::string> run_all_experiments(const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  const auto at = [&](const char* name) { return (fs::path(dir) / name).string(); };
  std::vector<std::string> written;
  const auto emit = [&](const char* name, const std::string& text) {
    write_text_file(at(name), text);
    written.emplace_back(name);
  };

  const SelectionReport sel = run_selection_experiment(cfg);
  emit("selection.csv", selection_csv(sel));
  emit("selection_diff.csv", selection_diff_csv(sel));
  emit("selection_stability.csv", selection_stability_csv(sel));

  const GainReport gain = run_gain_experiment(cfg);
  emit("gain.csv", gain_csv(gain));

  const EstimationReport est = run_estimation_experiment(cfg);
  emit("estimation.csv", estimation_csv(est));
  emit("estimation_summary.csv", estimation_summary_csv(est));

  if (!sel.failures.empty()) emit("guess_failures.csv", failures_csv(sel.failures));
  return written;
}

}  // namespace obsel
