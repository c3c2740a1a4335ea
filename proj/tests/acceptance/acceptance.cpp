// Acceptance run: one PASS/FAIL line per criterion, each with its own time budget.

#include "obsel/errors.hpp"
#include "obsel/estimation.hpp"
#include "obsel/experiments.hpp"
#include "obsel/gramian.hpp"
#include "obsel/integrator.hpp"
#include "obsel/kinetics.hpp"
#include "obsel/selection.hpp"
#include "obsel/sensitivity.hpp"
#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace obsel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::set<int> failed;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out{false, ""};
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_s) {
    out.ok = false;
    out.detail += "; over time budget";
  }
  if (!out.ok) failed.insert(id);
  std::printf("%s [%2d] %s: %s (%.2fs of %.0fs)\n", out.ok ? "PASS" : "FAIL", id, name, out.detail.c_str(), secs,
              budget_s);
  std::fflush(stdout);
}

double gap_scale(double a, double b) { return std::max({1.0, std::abs(a), std::abs(b)}); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome integrator_order() {
  const ModelSpec model(
      1, [](const Vector& x) { return Vector(-x.array().cube()); },
      [](const Vector& x) { return Matrix::Constant(1, 1, -3.0 * x[0] * x[0]); }, MeasurementMatrix::identity(1));
  const double exact = 1.0 / std::sqrt(3.0);
  std::vector<double> err;
  for (double T : {1e-2, 5e-3, 2.5e-3}) {
    IrkConfig cfg;
    cfg.T = T;
    const auto n = static_cast<std::size_t>(std::llround(1.0 / T)) + 1;
    err.push_back(std::abs(simulate(model, Vector::Ones(1), n, cfg).states.back()[0] - exact));
  }
  const double r1 = err[0] / err[1], r2 = err[1] / err[2];
  const bool ok = r1 >= 6.0 && r1 <= 10.0 && r2 >= 6.0 && r2 <= 10.0;
  return {ok, "error ratios " + fmt("%.3f", r1) + ", " + fmt("%.3f", r2)};
}

Outcome stability() {
  double worst = 0.0;
  for (double z : {-0.1, -1.0, -10.0}) {
    const double a11 = 1.0 - z / 4.0, a12 = z / 4.0, a21 = -z / 4.0, a22 = 1.0 - 5.0 * z / 12.0;
    const double det = a11 * a22 - a12 * a21;
    const double direct = 1.0 + z * (0.25 * (a22 - a12) / det + 0.75 * (a11 - a21) / det);
    const double formula = (1.0 + z / 3.0) / (1.0 - 2.0 * z / 3.0 + z * z / 6.0);
    const auto model = linear_model(Matrix::Constant(1, 1, z), MeasurementMatrix::identity(1));
    IrkConfig cfg;
    cfg.T = 1.0;
    const double stepped = irk_step(model, Vector::Ones(1), cfg).next[0];
    worst = std::max({worst, std::abs(stepped - direct), std::abs(stepped - formula)});
  }
  return {worst <= 1e-12, "max deviation " + fmt("%.2e", worst)};
}

Outcome sensitivities() {
  const auto model = kinetics::to_model(testing::bundled_network());
  IrkConfig cfg;
  const auto xi = propagate_sensitivities(model, simulate(model, testing::bundled_state(), 20, cfg), cfg);
  const auto fd = fd_sensitivity(model, testing::bundled_state(), 20, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const double scale = std::max(1.0, fd.xis[i].cwiseAbs().maxCoeff());
    worst = std::max(worst, (xi.xis[i] - fd.xis[i]).cwiseAbs().maxCoeff() / scale);
  }
  return {worst <= 1e-5, "max relative deviation " + fmt("%.2e", worst)};
}

Outcome gramian_equivalence() {
  const auto net = testing::bundled_network();
  const auto model = kinetics::to_model(net);
  IrkConfig cfg;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    Vector x0 = testing::bundled_state();
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0[i] += u(rng);
    Matrix c(4 + inst % 3, 6);
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
      for (Eigen::Index j = 0; j < 6; ++j) c(i, j) = g(rng);
    }
    const MeasurementMatrix meas(c);
    const auto stack = propagate_sensitivities(model, simulate(model, x0, 60, cfg), cfg);
    const auto atoms = build_atoms(meas, stack);
    Matrix w = Matrix::Zero(6, 6);
    for (const auto& a : atoms) w += a;
    const Matrix jg = lifted_output_jacobian(meas, SensorSet::all(atoms.size()), stack);
    const Matrix explicit_w = jg.transpose() * jg;
    worst = std::max(worst, (w - explicit_w).cwiseAbs().maxCoeff() / std::max(1.0, explicit_w.cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-10, "10 instances, max relative entry deviation " + fmt("%.2e", worst)};
}

Outcome trace_modularity() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto atoms = testing::random_atoms(seed, 2, 8, 5, 3);
    const MetricEvaluator eval(atoms, Metric::trace());
    for (unsigned mask = 0; mask < 256; ++mask) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        if (mask >> j & 1u) sum += eval(SensorSet{j});
      }
      worst = std::max(worst, std::abs(eval(testing::from_mask(mask, 8)) - sum) / std::max(1.0, std::abs(sum)));
    }
  }
  return {worst <= 1e-10, "all 256 subsets on 5 seeds, max deviation " + fmt("%.2e", worst)};
}

Outcome logdet_submodular() {
  std::size_t checks = 0, violations = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index n_x = 3 + static_cast<Eigen::Index>(seed % 4);
    const auto atoms = testing::random_atoms(1000 + seed, 3, 6, n_x, 2);
    const MetricEvaluator eval(atoms, Metric::logdet());
    std::vector<double> v(64);
    for (unsigned m = 0; m < 64; ++m) v[m] = eval(testing::from_mask(m, 6));
    for (unsigned b = 0; b < 64; ++b) {
      for (unsigned a = b;; a = (a - 1) & b) {
        for (unsigned s = 0; s < 6; ++s) {
          if (b >> s & 1u) continue;
          const double ga = v[a | 1u << s] - v[a];
          const double gb = v[b | 1u << s] - v[b];
          const double scale = gap_scale(v[a], v[b | 1u << s]);
          const double dr = (gb - ga) / scale;  // positive means returns increased
          const double mono = -gb / scale;
          worst = std::max({worst, dr, mono});
          ++checks;
          if (dr > 1e-9 || mono > 1e-9) ++violations;
        }
        if (a == 0) break;
      }
    }
  }
  return {violations == 0, std::to_string(checks) + " (A,B,s) triples, " + std::to_string(violations) +
                               " violations, worst relative excess " + fmt("%.2e", worst)};
}

Outcome greedy_bound() {
  std::size_t trace_mismatch = 0, bound_fail = 0;
  double worst_ratio_margin = -1.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t r = 2 + seed % 3;
    const auto atoms = testing::random_atoms(5000 + seed, 2, 8, 6, 2);
    const auto gt = greedy_select(atoms, r, Metric::trace());
    const auto et = exhaustive_select(atoms, r, Metric::trace());
    if (std::abs(gt.objective - et.objective) > 1e-10 * std::max(1.0, et.objective)) ++trace_mismatch;

    const auto gl = greedy_select(atoms, r, Metric::logdet());
    const auto el = exhaustive_select(atoms, r, Metric::logdet());
    const auto rep = greedy_bound_check(gl, el, metric_eval(atoms, SensorSet{}, Metric::logdet()));
    if (!rep.satisfied) ++bound_fail;
    if (rep.ratio) worst_ratio_margin = std::max(worst_ratio_margin, *rep.ratio - rep.bound);
  }
  return {trace_mismatch == 0 && bound_fail == 0,
          "trace mismatches " + std::to_string(trace_mismatch) + "/100, log-det bound failures " +
              std::to_string(bound_fail) + "/100, max ratio minus bound " + fmt("%.3f", worst_ratio_margin)};
}

Outcome averaging() {
  const auto model = kinetics::to_model(testing::bundled_network());
  IrkConfig cfg;
  const auto guesses = sample_perturbed_guesses(testing::bundled_state(), 1.0, 10, 3);
  const auto atoms = averaged_gramian_collection(model, model.measurement(), guesses, 200, cfg);
  double worst = 0.0;
  for (auto m : {Metric::trace(), Metric::logdet()}) {
    const MetricEvaluator eval(atoms, m);
    for (unsigned mask = 0; mask < 64; ++mask) {
      const auto s = testing::from_mask(mask, 6);
      double sum = 0.0;
      for (std::size_t k = 0; k < atoms.q(); ++k) sum += eval.single(k, s);
      const double avg = eval(s);
      worst = std::max(worst, std::abs(avg - sum / 10.0) / std::max(1.0, std::abs(avg)));
    }
  }
  bool same = true;
  const std::vector<Vector> one{guesses[4]};
  const auto q1 = averaged_gramian_collection(model, model.measurement(), one, 200, cfg);
  GramianAtoms single;
  single.atoms.push_back(single_guess_atoms(model, model.measurement(), guesses[4], 200, cfg));
  single.N = 200;
  single.n_x = 6;
  single.n_y = 6;
  for (auto m : {Metric::trace(), Metric::logdet()}) {
    for (std::size_t r = 1; r <= 6; ++r) {
      const auto a = greedy_select(q1, r, m);
      const auto b = greedy_select(single, r, m);
      same = same && a.chosen == b.chosen && a.objective == b.objective;
    }
  }
  return {worst <= 1e-12 && same, "max deviation " + fmt("%.2e", worst) +
                                      (same ? ", q=1 selections identical" : ", q=1 selections differ")};
}

Outcome recovery() {
  const auto model = kinetics::to_model(testing::bundled_network());
  IrkConfig cfg;
  const std::size_t N = 200;
  const Vector& x = testing::bundled_state();
  const auto stack = propagate_sensitivities(model, simulate(model, x, N, cfg), cfg);
  GramianAtoms atoms;
  atoms.atoms.push_back(build_atoms(model.measurement(), stack));
  atoms.N = N;
  atoms.n_x = 6;
  atoms.n_y = 6;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::size_t tested = 0, skipped = 0;
  double worst = 0.0;
  for (unsigned mask = 1; mask < 64; ++mask) {
    const auto s = testing::from_mask(mask, 6);
    if (numerical_rank(assemble(atoms, 0, s)) < 6) {
      ++skipped;
      continue;
    }
    Vector guess = x;
    for (Eigen::Index i = 0; i < 6; ++i) guess[i] *= 1.0 + u(rng);
    const Vector y = lifted_output(model, s, x, N, cfg);
    const auto res = estimate_initial_state(EstimationProblem::for_concentrations(model, s, y, guess), N, cfg);
    worst = std::max(worst, relative_error(x, res.x_hat));
    ++tested;
  }
  return {worst <= 1e-5 && tested > 0, std::to_string(tested) + " full-rank sets (" + std::to_string(skipped) +
                                           " rank-deficient skipped), worst relative error " + fmt("%.2e", worst)};
}

Outcome fig4_analogue() {
  const auto cfg = load_experiment_config(testing::data_path("configs/desk.json"));
  if (cfg.num_random_configs != 200) return {false, "desk config must use 200 random selections"};
  const auto rep = run_estimation_experiment(cfg);
  bool ok = rep.summary.size() == 6;
  std::string detail;
  for (const auto& s : rep.summary) {
    ok = ok && s.optimal && !std::isnan(s.random_min);
    detail += fmt("f=%.2f ", s.fraction) + s.method + " " + fmt("%.1e", s.relative_error) + " vs min " +
              fmt("%.1e", s.random_min) + "; ";
  }
  return {ok, detail};
}

Outcome robustness() {
  auto cfg = load_experiment_config(testing::data_path("configs/desk.json"));
  cfg.q = 10;
  cfg.stability_seeds = 4;  // with the primary seed: 5 independent draws
  const double mean = cfg.x_true.mean();
  std::string detail;
  bool ok = true;
  for (double factor : {0.5, 1.0, 2.0}) {
    cfg.p = factor * mean;
    const auto rep = run_selection_experiment(cfg);
    std::size_t mismatched = 0;
    for (const auto& s : rep.stability) mismatched += !s.matches;
    ok = ok && rep.stable;
    detail += fmt("p=%.2f: ", cfg.p) + std::to_string(mismatched) + "/" + std::to_string(rep.stability.size()) +
              " reruns differ; ";
  }
  return {ok, detail};
}

Outcome full_scale() {
  const auto cfg = load_experiment_config(testing::data_path("configs/full_scale.json"));
  const Vector full_x = (Vector(9) << 2, 0, 0, 1, 0, 0, 0, 0.2, 0).finished();
  if (cfg.T != 1e-12 || cfg.N != 1000 || cfg.q != 10 || cfg.x_true != full_x || cfg.net().num_species() != 9) {
    return {false, "config does not carry the full-scale parameters"};
  }
  const auto a = fs::temp_directory_path() / "obsel_accept_scale_a";
  const auto b = fs::temp_directory_path() / "obsel_accept_scale_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const auto files = run_all_experiments(cfg, a.string());
  run_all_experiments(cfg, b.string());

  const std::vector<std::pair<std::string, std::string>> schema{
      {"selection.csv", "metric,r,source,guess,chosen,objective"},
      {"selection_diff.csv", "metric,r,guess,added,removed"},
      {"selection_stability.csv", "metric,r,seed,chosen,matches_primary"},
      {"gain.csv", "step,metric,avg_gain,single_mean,single_min,single_max"},
      {"estimation.csv", "fraction,r,method,seed,chosen,relative_error,converged,iterations,objective,error"},
      {"estimation_summary.csv", "fraction,r,method,relative_error,random_min,random_median,optimal"}};
  std::size_t rows = 0;
  for (const auto& [name, header] : schema) {
    const auto text = slurp(a / name);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header) return {false, name + ": bad header"};
    const auto cols = std::count(header.begin(), header.end(), ',');
    while (std::getline(in, line)) {
      if (std::count(line.begin(), line.end(), ',') != cols) return {false, name + ": ragged row"};
      ++rows;
    }
    if (text != slurp(b / name)) return {false, name + ": rerun differs"};
  }
  fs::remove_all(a);
  fs::remove_all(b);
  return {true, std::to_string(files.size()) + " files, " + std::to_string(rows) +
                    " rows, schema valid, rerun bitwise identical"};
}

}  // namespace

// Usage: acceptance [--expect-fail ID]...
// Criteria listed with --expect-fail are known failures; the run succeeds only
// when the failing set matches that list exactly.
int main(int argc, char** argv) {
  std::set<int> expected;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--expect-fail" && i + 1 < argc) {
      expected.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--expect-fail ID]...\n");
      return 2;
    }
  }
  criterion(1, "integrator order on x' = -x^3", 1, integrator_order);
  criterion(2, "linear stability function", 1, stability);
  criterion(3, "sensitivities vs finite differences", 5, sensitivities);
  criterion(4, "Gramian atoms vs explicit lifted Jacobian", 5, gramian_equivalence);
  criterion(5, "trace modularity", 5, trace_modularity);
  criterion(6, "log-det submodularity and monotonicity", 30, logdet_submodular);
  criterion(7, "greedy optimality and bound", 60, greedy_bound);
  criterion(8, "averaging structure", 5, averaging);
  criterion(9, "estimation recovery", 60, recovery);
  criterion(10, "optimal vs random selection errors", 300, fig4_analogue);
  criterion(11, "averaged selection robustness", 120, robustness);
  criterion(12, "full-scale configuration end to end", 600, full_scale);
  std::printf("%zu of 12 criteria failed", failed.size());
  if (!expected.empty()) {
    std::printf(" (known failures:");
    for (int id : expected) std::printf(" %d", id);
    std::printf(")");
  }
  std::printf("\n");
  return failed == expected ? 0 : 1;
}
