#include "cli.hpp"

#include "obsel/errors.hpp"
#include "obsel/estimation.hpp"
#include "obsel/experiments.hpp"
#include "obsel/integrator.hpp"
#include "obsel/selection.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace obsel {

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> N;
  std::optional<double> T;
  std::optional<std::string> metric;
  std::optional<std::size_t> r;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment or network document (JSON)")->required();
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--N", o.N, "observation window length");
  cmd->add_option("--T", o.T, "step size");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg = load_experiment_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.N) cfg.N = *o.N;
  if (o.T) cfg.T = cfg.irk.T = *o.T;
  if (o.metric) cfg.metric.kind = parse_metric_kind(*o.metric);
  if (o.r) cfg.r = *o.r;
  cfg.validate();
  return cfg;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

int run_simulate(const Overrides& o, const std::string& path, const std::string& format, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  const ModelSpec model = kinetics::to_model(cfg.net());
  const Trajectory traj = simulate(model, cfg.x_true, cfg.N, cfg.irk);
  if (format == "json") {
    nlohmann::ordered_json doc;
    doc["T"] = cfg.T;
    doc["species"] = cfg.net().species();
    auto states = nlohmann::ordered_json::array();
    for (const auto& x : traj.states) states.push_back(std::vector<double>(x.data(), x.data() + x.size()));
    doc["states"] = states;
    emit(doc.dump(2) + "\n", path, out);
  } else {
    emit(trajectory_csv(traj, cfg.T, cfg.net().species()), path, out);
  }
  return 0;
}

int run_select(const Overrides& o, const std::string& method, const std::string& format, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  const ExperimentContext ctx = prepare_experiment(cfg, cfg.seed);
  const std::size_t r = cfg.selection_size();
  SelectionResult res;
  if (method == "greedy") {
    res = greedy_select(ctx.collection.atoms, r, cfg.metric);
  } else if (method == "exhaustive") {
    res = exhaustive_select(ctx.collection.atoms, r, cfg.metric);
  } else {
    res = random_select(ctx.collection.atoms, r, cfg.metric, cfg.seed);
  }
  if (format == "json") {
    out << to_json(res) << '\n';
  } else {
    out << format_sensor_list(res.chosen) << '\n';
  }
  return 0;
}

int run_estimate(const Overrides& o, const std::string& sensors, const std::string& measurements,
                 const std::string& format, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  const ModelSpec model = kinetics::to_model(cfg.net());
  SensorSet s;
  Vector y;
  std::size_t N = cfg.N;
  if (!measurements.empty()) {
    MeasurementData data = read_measurements_csv(measurements, cfg.n_y());
    if (!sensors.empty() && parse_sensor_list(sensors, cfg.n_y()) != data.sensors) {
      throw ArgumentError("--sensors disagrees with the measurement file header");
    }
    s = data.sensors;
    y = data.y_tilde;
    N = data.window;
  } else {
    s = sensors.empty() ? SensorSet::all(cfg.n_y()) : parse_sensor_list(sensors, cfg.n_y());
    y = synthesize_measurements(model, s, cfg.x_true, N, cfg.irk);
  }
  if (s.empty()) throw ArgumentError("no sensors selected");
  const auto prob = EstimationProblem::for_concentrations(model, s, y, estimation_start(cfg));
  EstimationResult res = estimate_initial_state(prob, N, cfg.irk, cfg.solver);
  if (measurements.empty()) res.relative_error = relative_error(cfg.x_true, res.x_hat);
  if (format == "json") {
    out << to_json(res) << '\n';
  } else {
    out << "species,x_hat\n";
    const auto& names = cfg.net().species();
    for (Eigen::Index i = 0; i < res.x_hat.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", res.x_hat[i]);
      out << names[static_cast<std::size_t>(i)] << ',' << buf << '\n';
    }
  }
  return 0;
}

int run_experiment(const Overrides& o, const std::string& dir, std::ostream& out) {
  const ExperimentConfig cfg = resolve(o);
  const std::string target = dir.empty() ? cfg.output_dir : dir;
  for (const auto& name : run_all_experiments(cfg, target)) out << target << '/' << name << '\n';
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Observability-based sensor selection for reaction networks", "obsel"};
  app.require_subcommand(1);

  Overrides o;
  std::string path, format = "csv", method = "greedy", sensors, measurements;
  const auto format_check = CLI::IsMember({"csv", "json"});

  auto* sim = app.add_subcommand("simulate", "integrate x_true over the window and print the trajectory");
  add_common(sim, o);
  sim->add_option("--out", path, "output file (default stdout)");
  sim->add_option("--format", format)->check(format_check);

  auto* sel = app.add_subcommand("select", "choose r sensors with the averaged metric");
  add_common(sel, o);
  sel->add_option("--metric", o.metric)->check(CLI::IsMember({"trace", "logdet"}));
  sel->add_option("--r", o.r, "number of sensors");
  sel->add_option("--method", method)->check(CLI::IsMember({"greedy", "exhaustive", "random"}));
  sel->add_option("--format", format)->check(format_check);

  auto* est = app.add_subcommand("estimate", "recover the initial state from measurements");
  add_common(est, o);
  est->add_option("--sensors", sensors, "1-based sensor list, e.g. 1,3");
  est->add_option("--measurements", measurements, "measurement CSV (default: synthesized from x_true)");
  est->add_option("--format", format)->check(format_check);

  auto* exp = app.add_subcommand("experiment", "run the selection, gain and estimation pipelines");
  add_common(exp, o);
  exp->add_option("--out", path, "output directory (default: output_dir from the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 1;
  }

  try {
    if (*sim) return run_simulate(o, path, format, out);
    if (*sel) return run_select(o, method, format, out);
    if (*est) return run_estimate(o, sensors, measurements, format, out);
    return run_experiment(o, path, out);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace obsel
