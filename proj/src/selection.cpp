#include "obsel/selection.hpp"

#include "obsel/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace obsel {

std::string to_string(MetricKind kind) { return kind == MetricKind::Trace ? "trace" : "logdet"; }

MetricKind parse_metric_kind(const std::string& name) {
  if (name == "trace") return MetricKind::Trace;
  if (name == "logdet" || name == "log-det" || name == "log_det") return MetricKind::LogDet;
  throw ArgumentError("unknown metric '" + name + "' (expected trace or logdet)");
}

std::string to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::Greedy: return "greedy";
    case SelectionMethod::Exhaustive: return "exhaustive";
    case SelectionMethod::Random: return "random";
  }
  return "unknown";
}

double log_det_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

MetricEvaluator::MetricEvaluator(const GramianAtoms& atoms, Metric metric)
    : atoms_(&atoms), metric_(metric) {
  if (atoms.q() == 0) throw ArgumentError("atom collection has no guesses");
  if (!(metric.logdet_epsilon >= 0.0)) throw ArgumentError("logdet_epsilon must be nonnegative");
  eps_hat_.resize(atoms.q());
  for (std::size_t k = 0; k < atoms.q(); ++k) {
    double full_trace = 0.0;
    for (std::size_t j = 0; j < atoms.n_y; ++j) {
      const Matrix& g = atoms.atom(k, j);
      if (!g.allFinite()) {
        throw NumericalError("non-finite Gramian atom (guess " + std::to_string(k + 1) + ", sensor " +
                             std::to_string(j + 1) + ")");
      }
      full_trace += g.trace();
    }
    eps_hat_[k] = metric.logdet_epsilon * std::max(1.0, full_trace / static_cast<double>(atoms.n_x));
  }
}

double MetricEvaluator::single(std::size_t kappa, const SensorSet& s) const {
  if (metric_.kind == MetricKind::Trace) {
    s.check_range(atoms_->n_y);
    double t = 0.0;
    for (auto j : s) t += atoms_->atom(kappa, j).trace();
    return t;
  }
  Matrix w = assemble(*atoms_, kappa, s);
  w.diagonal().array() += eps_hat_[kappa];
  return log_det_spd(w);
}

double MetricEvaluator::operator()(const SensorSet& s) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < atoms_->q(); ++k) sum += single(k, s);
  return sum / static_cast<double>(atoms_->q());
}

double metric_eval(const GramianAtoms& atoms, const SensorSet& s, const Metric& m) {
  return MetricEvaluator(atoms, m)(s);
}

namespace {

void check_r(std::size_t r, std::size_t n_y) {
  if (r < 1 || r > n_y) {
    throw ArgumentError("selection size r=" + std::to_string(r) + " outside 1.." + std::to_string(n_y));
  }
}

// Deterministic argmax: first strictly greater value wins, so ties go to the
// lowest candidate index. NaN never wins.
std::size_t argmax(const std::vector<double>& values) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    if (best == values.size() || values[i] > values[best]) best = i;
  }
  return best == values.size() ? 0 : best;
}

template <bool Parallel>
SelectionResult greedy_impl(const GramianAtoms& atoms, std::size_t r, const Metric& m) {
  check_r(r, atoms.n_y);
  const MetricEvaluator eval(atoms, m);
  SelectionResult out;
  out.method = SelectionMethod::Greedy;
  out.metric = m;

  SensorSet chosen;
  double current = eval(chosen);
  for (std::size_t step = 1; step <= r; ++step) {
    std::vector<std::size_t> candidates;
    for (std::size_t a = 0; a < atoms.n_y; ++a) {
      if (!chosen.contains(a)) candidates.push_back(a);
    }
    std::vector<double> values(candidates.size());
    const auto n_cand = static_cast<long>(candidates.size());
    if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic)
      for (long c = 0; c < n_cand; ++c) values[c] = eval(chosen.with(candidates[c]));
    } else {
      for (long c = 0; c < n_cand; ++c) values[c] = eval(chosen.with(candidates[c]));
    }
    const std::size_t pick = argmax(values);
    const std::size_t node = candidates[pick];
    out.gains.push_back({step, node, values[pick] - current});
    chosen = chosen.with(node);
    current = values[pick];
  }
  out.chosen = std::move(chosen);
  out.objective = current;
  return out;
}

}  // namespace

SelectionResult greedy_select(const GramianAtoms& atoms, std::size_t r, const Metric& m) {
  return greedy_impl<true>(atoms, r, m);
}

namespace reference {

SelectionResult greedy_select_serial(const GramianAtoms& atoms, std::size_t r, const Metric& m) {
  return greedy_impl<false>(atoms, r, m);
}

}  // namespace reference

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i stays integral at every step.
    const std::uint64_t num = n - k + i;
    if (result > std::numeric_limits<std::uint64_t>::max() / num) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * num / i;
  }
  return result;
}

SelectionResult exhaustive_select(const GramianAtoms& atoms, std::size_t r, const Metric& m,
                                  std::uint64_t max_subsets) {
  check_r(r, atoms.n_y);
  const auto count = binomial(atoms.n_y, r);
  if (count > max_subsets) {
    throw CapacityError("exhaustive search over " + std::to_string(count) + " subsets exceeds limit " +
                        std::to_string(max_subsets));
  }
  const MetricEvaluator eval(atoms, m);
  std::vector<std::size_t> idx(r);
  std::iota(idx.begin(), idx.end(), 0);

  SelectionResult out;
  out.method = SelectionMethod::Exhaustive;
  out.metric = m;
  bool have = false;
  while (true) {
    const SensorSet s(idx);
    const double v = eval(s);
    if (!have || v > out.objective) {
      out.chosen = s;
      out.objective = v;
      have = true;
    }
    // next combination in lexicographic order
    std::size_t i = r;
    while (i > 0 && idx[i - 1] == atoms.n_y - r + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t k = i; k < r; ++k) idx[k] = idx[k - 1] + 1;
  }
  return out;
}

SelectionResult random_select(std::size_t n_y, std::size_t r, std::uint64_t seed) {
  check_r(r, n_y);
  std::vector<std::size_t> pool(n_y);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<std::size_t> pick;
  pick.reserve(r);
  std::mt19937_64 rng(seed);
  std::sample(pool.begin(), pool.end(), std::back_inserter(pick), static_cast<std::ptrdiff_t>(r), rng);
  SelectionResult out;
  out.chosen = SensorSet(std::move(pick));
  out.objective = std::numeric_limits<double>::quiet_NaN();
  out.method = SelectionMethod::Random;
  out.seed = seed;
  return out;
}

SelectionResult random_select(const GramianAtoms& atoms, std::size_t r, const Metric& m,
                              std::uint64_t seed) {
  SelectionResult out = random_select(atoms.n_y, r, seed);
  out.metric = m;
  out.objective = metric_eval(atoms, out.chosen, m);
  return out;
}

BoundReport greedy_bound_check(const SelectionResult& greedy, const SelectionResult& opt,
                               double empty_value) {
  if (greedy.chosen.size() != opt.chosen.size()) {
    throw ArgumentError("bound check needs selections of equal size");
  }
  const auto r = static_cast<double>(greedy.chosen.size());
  BoundReport rep;
  rep.bound = std::pow((r - 1.0) / r, r);
  rep.gap = opt.objective - greedy.objective;
  const double span = opt.objective - empty_value;
  if (span == 0.0) {
    rep.satisfied = true;
    return rep;
  }
  rep.ratio = rep.gap / span;
  rep.satisfied = *rep.ratio <= rep.bound + 1e-12;
  return rep;
}

std::string format_sensor_list(const SensorSet& s) {
  std::string out;
  for (auto j : s) {
    if (!out.empty()) out += ',';
    out += std::to_string(j + 1);
  }
  return out;
}

SensorSet parse_sensor_list(const std::string& text, std::size_t n_y) {
  std::vector<std::size_t> members;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      throw ArgumentError("bad sensor index '" + item + "'");
    }
    if (pos != item.size() || v < 1 || static_cast<std::size_t>(v) > n_y) {
      throw ArgumentError("sensor index '" + item + "' outside 1.." + std::to_string(n_y));
    }
    members.push_back(static_cast<std::size_t>(v - 1));
  }
  return SensorSet(std::move(members));
}

std::string to_json(const SelectionResult& result) {
  nlohmann::ordered_json doc;
  std::vector<std::size_t> chosen;
  for (auto j : result.chosen) chosen.push_back(j + 1);
  doc["chosen"] = chosen;
  auto gains = nlohmann::ordered_json::array();
  for (const auto& g : result.gains) {
    gains.push_back({{"step", g.step}, {"node", g.node + 1}, {"gain", g.gain}});
  }
  doc["gains"] = gains;
  if (std::isfinite(result.objective)) {
    doc["objective"] = result.objective;
  } else {
    doc["objective"] = nullptr;
  }
  doc["method"] = to_string(result.method);
  if (result.seed) {
    doc["seed"] = *result.seed;
  } else {
    doc["seed"] = nullptr;
  }
  doc["metric"] = to_string(result.metric.kind);
  doc["epsilon"] = result.metric.logdet_epsilon;
  return doc.dump(2);
}

}  // namespace obsel
