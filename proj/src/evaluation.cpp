#include "bregman/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "bregman/rng.hpp"
#include "bregman/sampling.hpp"

namespace bregman {

double partition_count(Index m, Index k) {
  // Stirling numbers of the second kind, summed over block counts 1..k.
  // Doubles are exact far beyond the guard's magnitude.
  const Index blocks = std::min(m, k);
  std::vector<double> prev(blocks + 1, 0.0), cur(blocks + 1, 0.0);
  prev[0] = 1.0;  // S(0, 0) = 1
  const double cap = 1e18;
  for (Index i = 1; i <= m; ++i) {
    cur[0] = 0.0;
    for (Index j = 1; j <= blocks; ++j)
      cur[j] = std::min(cap, static_cast<double>(j) * prev[j] + prev[j - 1]);
    std::swap(prev, cur);
  }
  double total = 0.0;
  for (Index j = 1; j <= blocks; ++j) total = std::min(cap, total + prev[j]);
  return total;
}

ExhaustiveResult exhaustive_hard_optimum(const DivergenceSpec& spec, const WeightedPointSet& ws,
                                         Index k, std::uint64_t guard) {
  if (k < 1) throw std::invalid_argument("evaluation: k must be >= 1");
  if (ws.dim() != spec.dim())
    throw std::invalid_argument("evaluation: exhaustive_hard_optimum dimension mismatch");
  for (Index i = 0; i < ws.m(); ++i)
    spec.require_in_domain(ws.row(i), "exhaustive_hard_optimum");

  const Index m = ws.m();
  if (k >= m) {
    // Each point is its own center.
    ExhaustiveResult result{HardModel{ws.points}, 0.0, 1};
    result.cost = cost_hard(spec, ws, result.model);
    return result;
  }
  const double count = partition_count(m, k);
  if (count > static_cast<double>(guard)) {
    std::ostringstream msg;
    msg << "evaluation: " << count << " partitions of " << m << " points into <= " << k
        << " blocks exceeds the guard of " << guard;
    throw std::invalid_argument(msg.str());
  }

  const auto clamp_to_box = [&](RowMatrix& rows) {
    if (spec.has_box())
      rows = rows.cwiseMax(spec.domain_low()).cwiseMin(spec.domain_high());
  };

  // Restricted-growth strings over at most k block labels.
  std::vector<Index> code(m, 0);
  std::vector<Index> prefix_max(m, 0);  // max label among code[0..i-1]; prefix_max[0] unused
  const Index d = ws.dim();
  RowMatrix sums(k, d);
  Eigen::VectorXd mass(k);
  RowMatrix means(k, d);

  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<Index> best_code(m, 0);
  std::uint64_t examined = 0;

  for (;;) {
    ++examined;
    const Index blocks = (m == 1) ? 1 : prefix_max[m - 1] + 1;
    const Index used = std::max(blocks, code[m - 1] + 1);
    sums.topRows(used).setZero();
    mass.head(used).setZero();
    for (Index i = 0; i < m; ++i) {
      sums.row(code[i]) += ws.weights(i) * ws.points.row(i);
      mass(code[i]) += ws.weights(i);
    }
    for (Index j = 0; j < used; ++j) means.row(j) = sums.row(j) / mass(j);
    double cost = 0.0;
    for (Index i = 0; i < m; ++i)
      cost += ws.weights(i) *
              bregman_closed_unchecked(spec, ws.row(i), row_span(means, code[i]));
    cost /= static_cast<double>(ws.origin_n);
    if (cost < best_cost) {
      best_cost = cost;
      best_code = code;
    }

    // Successor: rightmost position that can still grow by one label.
    Index i = m - 1;
    for (; i > 0; --i) {
      if (code[i] <= prefix_max[i] && code[i] + 1 < k) break;
      code[i] = 0;
    }
    if (i == 0) break;
    ++code[i];
    for (Index j = i + 1; j < m; ++j)
      prefix_max[j] = std::max(prefix_max[j - 1], code[j - 1]);
  }

  // Rebuild the winning model.
  const Index blocks = *std::max_element(best_code.begin(), best_code.end()) + 1;
  sums.topRows(blocks).setZero();
  mass.head(blocks).setZero();
  for (Index i = 0; i < m; ++i) {
    sums.row(best_code[i]) += ws.weights(i) * ws.points.row(i);
    mass(best_code[i]) += ws.weights(i);
  }
  RowMatrix centers(blocks, d);
  for (Index j = 0; j < blocks; ++j) centers.row(j) = sums.row(j) / mass(j);
  clamp_to_box(centers);
  ExhaustiveResult result{HardModel{std::move(centers)}, 0.0, examined};
  result.cost = cost_hard(spec, ws, result.model);
  return result;
}

HardModel ptas(const DivergenceSpec& spec, const PointSet& ps, Index k, Index m,
               std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("evaluation: ptas needs m >= 1");
  WeightedPointSet coreset =
      (m >= ps.n()) ? unit_weights(ps)
                    : build_coreset(ps, k, m, spec.similarity().factor, 1, seed);
  return exhaustive_hard_optimum(spec, coreset, k).model;
}

double relative_error(double c_ss, double c_full) {
  if (!(c_full > 0.0))
    throw std::invalid_argument("evaluation: relative_error requires c_full > 0");
  return (c_ss - c_full) / c_full;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Coreset: return "coreset";
    case Method::Uniform: return "uniform";
    case Method::Full: return "full";
  }
  throw std::logic_error("evaluation: unknown method");
}

std::string mode_name(FitMode m) {
  return m == FitMode::Hard ? "hard" : "soft";
}

static Method method_from_name(const std::string& name) {
  if (name == "coreset") return Method::Coreset;
  if (name == "uniform") return Method::Uniform;
  if (name == "full") return Method::Full;
  throw ParseError("evaluation: unknown method '" + name + "'");
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig cfg;
    const auto& ds = j.at("dataset");
    if (ds.contains("file")) {
      cfg.dataset.file = ds.at("file").get<std::string>();
    } else if (ds.contains("generator")) {
      const auto& g = ds.at("generator");
      GeneratorConfig gen;
      gen.kind = g.at("kind").get<std::string>();
      if (gen.kind != "gaussian" && gen.kind != "poisson")
        throw ParseError("evaluation: generator kind must be gaussian or poisson");
      gen.n = g.at("n").get<Index>();
      gen.k = g.at("k").get<Index>();
      gen.d = g.at("d").get<Index>();
      gen.seed = g.contains("seed") ? g.at("seed").get<std::uint64_t>() : 0;
      if (g.contains("dirichlet_alpha")) gen.dirichlet_alpha = g.at("dirichlet_alpha").get<double>();
      if (g.contains("mean_var")) gen.mean_var = g.at("mean_var").get<double>();
      if (g.contains("comp_var")) gen.comp_var = g.at("comp_var").get<double>();
      if (g.contains("gamma_shape")) gen.gamma_shape = g.at("gamma_shape").get<double>();
      if (g.contains("gamma_rate")) gen.gamma_rate = g.at("gamma_rate").get<double>();
      cfg.dataset.generator = std::move(gen);
    } else {
      throw ParseError("evaluation: dataset needs a 'file' or 'generator' entry");
    }
    cfg.divergence = divergence_from_json(j.at("divergence"));
    cfg.k = j.at("k").get<Index>();
    cfg.sizes = j.at("sizes").get<std::vector<Index>>();
    cfg.trials = j.at("trials").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& name : j.at("methods")) cfg.methods.push_back(method_from_name(name));
    }
    if (j.contains("mode")) {
      const auto mode = j.at("mode").get<std::string>();
      if (mode == "hard") cfg.mode = FitMode::Hard;
      else if (mode == "soft") cfg.mode = FitMode::Soft;
      else throw ParseError("evaluation: mode must be hard or soft");
    }
    if (j.contains("tol")) cfg.tol = j.at("tol").get<double>();
    if (j.contains("max_iter")) cfg.max_iter = j.at("max_iter").get<int>();
    if (j.contains("bicriteria_runs")) cfg.bicriteria_runs = j.at("bicriteria_runs").get<int>();
    if (j.contains("standardize")) cfg.standardize = j.at("standardize").get<bool>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation: bad experiment config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("evaluation: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("evaluation: cannot parse '" + path + "': " + e.what());
  }
  return experiment_config_from_json(j);
}

std::uint64_t experiment_full_seed(std::uint64_t master, int trial) {
  return derive_seed(master, 0xf011, static_cast<std::uint64_t>(trial));
}

std::pair<std::uint64_t, std::uint64_t> experiment_trial_seeds(std::uint64_t master,
                                                               Method method, int size_index,
                                                               int trial) {
  const std::uint64_t tag = method == Method::Coreset ? 0xc0 : 0x1f;
  return {derive_seed(master, tag, static_cast<std::uint64_t>(size_index),
                      static_cast<std::uint64_t>(trial) * 2),
          derive_seed(master, tag, static_cast<std::uint64_t>(size_index),
                      static_cast<std::uint64_t>(trial) * 2 + 1)};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Seed adaptively, fit, and return the fitted model's cost on `evaluate_on`.
double fit_and_score(const ExperimentConfig& cfg, const WeightedPointSet& train,
                     const WeightedPointSet& evaluate_on, std::uint64_t fit_seed) {
  if (cfg.mode == FitMode::Hard) {
    HardModel init = seed_hard(cfg.divergence, train, cfg.k, fit_seed);
    auto [model, report] =
        lloyd_bregman(cfg.divergence, train, std::move(init), cfg.tol, cfg.max_iter);
    return cost_hard(cfg.divergence, evaluate_on, model);
  }
  SoftModel init = seed_soft(cfg.divergence, train, cfg.k, fit_seed);
  auto [model, report] =
      em_bregman(cfg.divergence, train, std::move(init), cfg.tol, cfg.max_iter);
  return cost_soft(cfg.divergence, evaluate_on, model);
}

struct TaskOutcome {
  bool failed = false;
  double cost = 0.0;
  double subsample_seconds = 0.0;
  double fit_seconds = 0.0;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("evaluation: trials must be >= 1");
  if (cfg.k < 1) throw std::invalid_argument("evaluation: k must be >= 1");
  if (cfg.methods.empty()) throw std::invalid_argument("evaluation: no methods requested");
  for (Index size : cfg.sizes)
    if (size < cfg.k)
      throw std::invalid_argument("evaluation: every subsample size must be >= k");

  // Materialize the data set.
  PointSet data;
  if (cfg.dataset.file) {
    data = load_points(*cfg.dataset.file);
  } else if (cfg.dataset.generator) {
    const auto& g = *cfg.dataset.generator;
    const std::uint64_t gen_seed = g.seed ? g.seed : derive_seed(cfg.seed, 0xda7a);
    if (g.kind == "gaussian")
      data = gen_gaussian_mixture(gen_seed, g.n, g.k, g.d, g.dirichlet_alpha, g.mean_var,
                                  g.comp_var)
                 .first;
    else
      data = gen_poisson_mixture(gen_seed, g.n, g.k, g.d, g.gamma_shape, g.gamma_rate).first;
  } else {
    throw std::invalid_argument("evaluation: experiment config has no dataset");
  }

  ExperimentResult result;
  if (cfg.standardize) data = standardize(data);
  if (cfg.divergence.has_box()) {
    ClampedPoints clamped = clamp_to_domain(data, cfg.divergence);
    data = std::move(clamped.points);
    result.clamped_coordinates = clamped.clamped_coordinates;
  }
  const WeightedPointSet full = unit_weights(data);
  const MahalanobisFactor& factor = cfg.divergence.similarity().factor;

  std::vector<Method> subsample_methods;
  for (Method m : cfg.methods)
    if (m != Method::Full) subsample_methods.push_back(m);

  // Task grid: full fits first, then (method, size, trial).
  struct Task {
    Method method;
    int size_index;  // -1 for full
    int trial;
  };
  std::vector<Task> tasks;
  for (int t = 0; t < cfg.trials; ++t) tasks.push_back({Method::Full, -1, t});
  for (std::size_t s = 0; s < cfg.sizes.size(); ++s)
    for (Method m : subsample_methods)
      for (int t = 0; t < cfg.trials; ++t) tasks.push_back({m, static_cast<int>(s), t});

  std::vector<TaskOutcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  const int threads = std::max(1, cfg.threads);

  const auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      const Task& task = tasks[idx];
      TaskOutcome& out = outcomes[idx];
      try {
        if (task.size_index < 0) {
          const auto start = Clock::now();
          out.cost = fit_and_score(cfg, full, full, experiment_full_seed(cfg.seed, task.trial));
          out.fit_seconds = seconds_since(start);
          continue;
        }
        const auto [sub_seed, fit_seed] =
            experiment_trial_seeds(cfg.seed, task.method, task.size_index, task.trial);
        const Index size = cfg.sizes[static_cast<std::size_t>(task.size_index)];
        const auto sub_start = Clock::now();
        const WeightedPointSet sub =
            task.method == Method::Coreset
                ? build_coreset(data, cfg.k, size, factor, cfg.bicriteria_runs, sub_seed)
                : uniform_subsample(data, size, sub_seed);
        out.subsample_seconds = seconds_since(sub_start);
        const auto fit_start = Clock::now();
        out.cost = fit_and_score(cfg, sub, full, fit_seed);
        out.fit_seconds = seconds_since(fit_start);
      } catch (const std::exception&) {
        out.failed = true;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // Full-cost denominator.
  double c_full_sum = 0.0;
  int c_full_count = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (tasks[i].size_index >= 0) continue;
    if (outcomes[i].failed) {
      ++result.failed_trials;
      continue;
    }
    c_full_sum += outcomes[i].cost;
    ++c_full_count;
  }
  if (c_full_count == 0)
    throw std::runtime_error("evaluation: every full-data fit failed; no error baseline");
  result.c_full_mean = c_full_sum / c_full_count;

  const bool want_full =
      std::find(cfg.methods.begin(), cfg.methods.end(), Method::Full) != cfg.methods.end();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Task& task = tasks[i];
    const TaskOutcome& out = outcomes[i];
    if (task.size_index < 0) {
      if (out.failed || !want_full) continue;
      result.trials.push_back({Method::Full, data.n(), task.trial, 0.0, 0.0, out.fit_seconds,
                               out.cost, result.c_full_mean});
      continue;
    }
    if (out.failed) {
      ++result.failed_trials;
      continue;
    }
    const Index size = cfg.sizes[static_cast<std::size_t>(task.size_index)];
    result.trials.push_back({task.method, size, task.trial,
                             relative_error(out.cost, result.c_full_mean), out.subsample_seconds,
                             out.fit_seconds, out.cost, result.c_full_mean});
  }

  // Per-(method, size) aggregates, in method-then-size order.
  std::vector<Method> summary_methods = cfg.methods;
  for (Method m : summary_methods) {
    std::vector<Index> sizes =
        (m == Method::Full) ? std::vector<Index>{data.n()} : cfg.sizes;
    for (Index size : sizes) {
      std::vector<double> etas;
      double time_sum = 0.0;
      for (const TrialRecord& rec : result.trials) {
        if (rec.method != m || rec.size != size) continue;
        etas.push_back(rec.eta);
        time_sum += rec.subsample_seconds + rec.fit_seconds;
      }
      if (etas.empty()) continue;
      const double r = static_cast<double>(etas.size());
      double mean = 0.0;
      for (double e : etas) mean += e;
      mean /= r;
      double var = 0.0;
      for (double e : etas) var += (e - mean) * (e - mean);
      var = etas.size() > 1 ? var / (r - 1.0) : 0.0;
      result.summary.push_back({m, size, mean, 1.96 * std::sqrt(var / r), time_sum / r});
    }
  }
  return result;
}

void write_trials_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("evaluation: cannot write '" + path + "'");
  std::string buf = "method,size,trial,eta,subsample_seconds,fit_seconds,cost_ss,cost_full\n";
  for (const TrialRecord& rec : result.trials) {
    buf += method_name(rec.method);
    buf.push_back(',');
    buf += std::to_string(rec.size);
    buf.push_back(',');
    buf += std::to_string(rec.trial);
    buf.push_back(',');
    append_double(buf, rec.eta);
    buf.push_back(',');
    append_double(buf, rec.subsample_seconds);
    buf.push_back(',');
    append_double(buf, rec.fit_seconds);
    buf.push_back(',');
    append_double(buf, rec.cost_ss);
    buf.push_back(',');
    append_double(buf, rec.cost_full);
    buf.push_back('\n');
  }
  out << buf;
}

void write_summary_csv(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("evaluation: cannot write '" + path + "'");
  std::string buf = "method,size,eta_mean,eta_ci,half_time_mean\n";
  for (const SummaryRow& row : result.summary) {
    buf += method_name(row.method);
    buf.push_back(',');
    buf += std::to_string(row.size);
    buf.push_back(',');
    append_double(buf, row.eta_mean);
    buf.push_back(',');
    append_double(buf, row.eta_ci);
    buf.push_back(',');
    append_double(buf, row.half_time_mean);
    buf.push_back('\n');
  }
  out << buf;
}

}  // namespace bregman
