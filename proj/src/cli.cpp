#include "bregman/cli.hpp"

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "bregman/clustering.hpp"
#include "bregman/data.hpp"
#include "bregman/divergence.hpp"
#include "bregman/evaluation.hpp"
#include "bregman/sampling.hpp"
#include "json.hpp"

namespace bregman {

namespace {

void write_json_file(const nlohmann::json& j, const std::string& path, const char* module) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(std::string(module) + ": cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path, const char* module) {
  std::ifstream in(path);
  if (!in) throw ParseError(std::string(module) + ": cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string(module) + ": cannot parse '" + path + "': " + e.what());
  }
  return j;
}

struct IngestOptions {
  bool standardize = false;
  bool clamp = false;
};

void add_ingest_flags(CLI::App* cmd, IngestOptions& opts) {
  cmd->add_flag("--standardize", opts.standardize, "z-score each column before anything else");
  cmd->add_flag("--clamp", opts.clamp,
                "clamp coordinates into the divergence's box domain after standardization");
}

PointSet ingest_points(const std::string& path, const IngestOptions& opts,
                       const DivergenceSpec* spec, long* clamped) {
  PointSet ps = load_points(path);
  if (opts.standardize) ps = standardize(ps);
  if (opts.clamp) {
    if (!spec || !spec->has_box())
      throw std::invalid_argument("cli: --clamp requires a box-domain divergence");
    ClampedPoints c = clamp_to_domain(ps, *spec);
    ps = std::move(c.points);
    if (clamped) *clamped = c.clamped_coordinates;
  }
  return ps;
}

WeightedPointSet ingest_weighted(const std::string& path, bool weighted,
                                 const IngestOptions& opts, const DivergenceSpec* spec,
                                 long* clamped) {
  if (weighted) {
    if (opts.standardize || opts.clamp)
      throw std::invalid_argument("cli: --standardize/--clamp apply to raw point CSVs only");
    return load_weighted(path);
  }
  return unit_weights(ingest_points(path, opts, spec, clamped));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"coreset construction and clustering for mu-similar Bregman divergences"};
  app.require_subcommand(1);

  // -------------------------------------------------- gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic mixture data set");
  struct {
    std::string kind;
    long n = 0;
    long k = 0;
    long d = 0;
    std::uint64_t seed = 0;
    double alpha = 0.5, mean_var = 5000.0, comp_var = 1.0;
    double gamma_shape = 10.0, gamma_rate = 1e-3;
    std::string out_path, truth_path;
  } g;
  gen->add_option("--kind", g.kind, "gaussian or poisson")
      ->required()
      ->check(CLI::IsMember({"gaussian", "poisson"}));
  gen->add_option("--n", g.n, "number of points")->required()->check(CLI::PositiveNumber);
  gen->add_option("--k", g.k, "number of components")->required()->check(CLI::PositiveNumber);
  gen->add_option("--d", g.d, "dimension")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", g.seed, "RNG seed")->required();
  gen->add_option("--alpha", g.alpha, "Dirichlet concentration (gaussian)");
  gen->add_option("--mean-var", g.mean_var, "variance of component means (gaussian)");
  gen->add_option("--comp-var", g.comp_var, "within-component variance (gaussian)");
  gen->add_option("--gamma-shape", g.gamma_shape, "rate prior shape (poisson)");
  gen->add_option("--gamma-rate", g.gamma_rate, "rate prior rate (poisson)");
  gen->add_option("--out", g.out_path, "output CSV path")->required();
  gen->add_option("--truth", g.truth_path, "optional mixture-truth JSON path");

  // -------------------------------------------------- coreset
  auto* cs = app.add_subcommand("coreset", "build an importance-sampled coreset");
  struct {
    std::string in_path, divergence_path, out_path, sens_path;
    long k = 0, m = 0;
    int runs = 1;
    std::uint64_t seed = 0;
    IngestOptions ingest;
  } c;
  cs->add_option("--in", c.in_path, "input points CSV")->required();
  cs->add_option("--divergence", c.divergence_path, "divergence spec JSON")->required();
  cs->add_option("--k", c.k, "number of clusters targeted")->required()->check(CLI::PositiveNumber);
  cs->add_option("--m", c.m, "coreset size (draws)")->required()->check(CLI::PositiveNumber);
  cs->add_option("--seed", c.seed, "RNG seed")->required();
  cs->add_option("--runs", c.runs, "seeding passes to boost the bicriteria step")
      ->check(CLI::PositiveNumber);
  cs->add_option("--out", c.out_path, "output weighted CSV path")->required();
  cs->add_option("--sensitivities", c.sens_path, "optional sensitivity-table JSON dump");
  add_ingest_flags(cs, c.ingest);

  // -------------------------------------------------- uniform
  auto* un = app.add_subcommand("uniform", "uniform subsample with replacement");
  struct {
    std::string in_path, out_path;
    long m = 0;
    std::uint64_t seed = 0;
    IngestOptions ingest;
  } u;
  un->add_option("--in", u.in_path, "input points CSV")->required();
  un->add_option("--m", u.m, "subsample size (draws)")->required()->check(CLI::PositiveNumber);
  un->add_option("--seed", u.seed, "RNG seed")->required();
  un->add_option("--out", u.out_path, "output weighted CSV path")->required();
  un->add_flag("--standardize", u.ingest.standardize, "z-score each column first");

  // -------------------------------------------------- cluster-hard / cluster-soft
  struct ClusterArgs {
    std::string in_path, divergence_path, out_path, report_path;
    bool weighted = false;
    long k = 0;
    std::uint64_t seed = 0;
    double tol = 1e-6;
    int max_iter = 100;
    IngestOptions ingest;
  };
  const auto add_cluster = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    auto args_ptr = std::make_shared<ClusterArgs>();
    cmd->add_option("--in", args_ptr->in_path, "input CSV (points, or weighted with --weighted)")
        ->required();
    cmd->add_flag("--weighted", args_ptr->weighted, "input is a weighted CSV with sidecar");
    cmd->add_option("--divergence", args_ptr->divergence_path, "divergence spec JSON")->required();
    cmd->add_option("--k", args_ptr->k, "number of clusters")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args_ptr->seed, "seeding RNG seed")->required();
    cmd->add_option("--tol", args_ptr->tol, "relative improvement stopping tolerance");
    cmd->add_option("--max-iter", args_ptr->max_iter, "iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--out", args_ptr->out_path, "output model JSON")->required();
    cmd->add_option("--report", args_ptr->report_path, "optional fit-report JSON");
    add_ingest_flags(cmd, args_ptr->ingest);
    return std::make_pair(cmd, args_ptr);
  };
  auto [hard_cmd, hard_args] = add_cluster("cluster-hard", "weighted Bregman hard clustering");
  auto [soft_cmd, soft_args] = add_cluster("cluster-soft", "weighted Bregman soft clustering (EM)");

  // -------------------------------------------------- eval
  auto* ev = app.add_subcommand("eval", "evaluate a model's cost on a data set");
  struct {
    std::string in_path, model_path, divergence_path, mode = "hard";
    bool weighted = false;
    IngestOptions ingest;
  } e;
  ev->add_option("--in", e.in_path, "input CSV")->required();
  ev->add_flag("--weighted", e.weighted, "input is a weighted CSV with sidecar");
  ev->add_option("--model", e.model_path, "model JSON")->required();
  ev->add_option("--divergence", e.divergence_path, "divergence spec JSON")->required();
  ev->add_option("--mode", e.mode, "hard or soft")->check(CLI::IsMember({"hard", "soft"}));
  add_ingest_flags(ev, e.ingest);

  // -------------------------------------------------- oracle
  auto* oc = app.add_subcommand("oracle", "exact small-instance optimum (or coreset PTAS)");
  struct {
    std::string in_path, divergence_path, out_path;
    bool weighted = false;
    long k = 0;
    long m = 0;
    double eps = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t guard = 10'000'000;
    IngestOptions ingest;
  } o;
  oc->add_option("--in", o.in_path, "input CSV")->required();
  oc->add_flag("--weighted", o.weighted, "input is a weighted CSV with sidecar");
  oc->add_option("--divergence", o.divergence_path, "divergence spec JSON")->required();
  oc->add_option("--k", o.k, "number of clusters")->required()->check(CLI::PositiveNumber);
  auto* opt_m = oc->add_option("--m", o.m, "run the PTAS through a coreset of this size")
                    ->check(CLI::PositiveNumber);
  auto* opt_seed = oc->add_option("--seed", o.seed, "RNG seed (PTAS)");
  oc->add_option("--eps", o.eps, "intended approximation error, recorded in the summary");
  oc->add_option("--guard", o.guard, "partition-count guard");
  oc->add_option("--out", o.out_path, "optional output model JSON");
  opt_m->needs(opt_seed);
  add_ingest_flags(oc, o.ingest);

  // -------------------------------------------------- experiment
  auto* ex = app.add_subcommand("experiment", "coreset-vs-uniform evaluation pipeline");
  struct {
    std::string config_path, out_prefix;
    int threads = 0;
    bool verbose = false;
  } x;
  ex->add_option("--config", x.config_path, "experiment config JSON")->required();
  ex->add_option("--out", x.out_prefix, "output path prefix")->required();
  ex->add_option("--threads", x.threads, "trial-parallel worker count (overrides config)");
  ex->add_flag("--verbose", x.verbose, "progress log on stderr");

  // -------------------------------------------------- parse & dispatch
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& help) {
    out << app.help() << "\n";
    return 0;
  } catch (const CLI::ParseError& pe) {
    err << pe.what() << "\n\n" << app.help() << "\n";
    return 1;
  }

  try {
    nlohmann::json summary;

    if (gen->parsed()) {
      auto [ps, truth] =
          g.kind == "gaussian"
              ? gen_gaussian_mixture(g.seed, g.n, g.k, g.d, g.alpha, g.mean_var, g.comp_var)
              : gen_poisson_mixture(g.seed, g.n, g.k, g.d, g.gamma_shape, g.gamma_rate);
      save_points(ps, g.out_path);
      if (!g.truth_path.empty()) {
        nlohmann::json t;
        t["component_weights"] = std::vector<double>(
            truth.component_weights.data(),
            truth.component_weights.data() + truth.component_weights.size());
        nlohmann::json params = nlohmann::json::array();
        for (Index i = 0; i < truth.component_params.rows(); ++i) {
          nlohmann::json row = nlohmann::json::array();
          for (Index j = 0; j < truth.component_params.cols(); ++j)
            row.push_back(truth.component_params(i, j));
          params.push_back(std::move(row));
        }
        t["component_params"] = std::move(params);
        t["assignment"] = truth.assignment;
        write_json_file(t, g.truth_path, "cli");
      }
      summary = {{"command", "gen"}, {"n", ps.n()}, {"d", ps.dim()}, {"k", g.k},
                 {"out", g.out_path}};
    } else if (cs->parsed()) {
      const DivergenceSpec spec = load_divergence(c.divergence_path);
      long clamped = 0;
      const PointSet ps = ingest_points(c.in_path, c.ingest, &spec, &clamped);
      const CoresetBuild build =
          build_coreset_detailed(ps, c.k, c.m, spec.similarity().factor, c.runs, c.seed);
      const WeightedPointSet& ws = build.coreset;
      save_weighted(ws, c.out_path);
      if (!c.sens_path.empty())
        write_json_file(sensitivity_to_json(build.table), c.sens_path, "cli");
      summary = {{"command", "coreset"}, {"rows", ws.m()}, {"total_weight", ws.total_weight()},
                 {"origin_n", ws.origin_n}, {"clamped", clamped}, {"out", c.out_path}};
    } else if (un->parsed()) {
      const PointSet ps = ingest_points(u.in_path, u.ingest, nullptr, nullptr);
      const WeightedPointSet ws = uniform_subsample(ps, u.m, u.seed);
      save_weighted(ws, u.out_path);
      summary = {{"command", "uniform"}, {"rows", ws.m()}, {"total_weight", ws.total_weight()},
                 {"origin_n", ws.origin_n}, {"out", u.out_path}};
    } else if (hard_cmd->parsed() || soft_cmd->parsed()) {
      const bool is_hard = hard_cmd->parsed();
      const ClusterArgs& a = is_hard ? *hard_args : *soft_args;
      const DivergenceSpec spec = load_divergence(a.divergence_path);
      long clamped = 0;
      const WeightedPointSet ws =
          ingest_weighted(a.in_path, a.weighted, a.ingest, &spec, &clamped);
      FitReport report;
      double cost = 0.0;
      if (is_hard) {
        HardModel init = seed_hard(spec, ws, a.k, a.seed);
        auto [model, rep] = lloyd_bregman(spec, ws, std::move(init), a.tol, a.max_iter);
        report = std::move(rep);
        cost = report.cost_trace.back();
        write_json_file(hard_model_to_json(model), a.out_path, "cli");
      } else {
        SoftModel init = seed_soft(spec, ws, a.k, a.seed);
        auto [model, rep] = em_bregman(spec, ws, std::move(init), a.tol, a.max_iter);
        report = std::move(rep);
        cost = report.cost_trace.back();
        write_json_file(soft_model_to_json(model), a.out_path, "cli");
      }
      if (!a.report_path.empty())
        write_json_file(fit_report_to_json(report), a.report_path, "cli");
      summary = {{"command", is_hard ? "cluster-hard" : "cluster-soft"},
                 {"cost", cost},
                 {"iterations", report.iterations},
                 {"converged", report.converged},
                 {"reseed_events", report.reseed_events},
                 {"out", a.out_path}};
    } else if (ev->parsed()) {
      const DivergenceSpec spec = load_divergence(e.divergence_path);
      long clamped = 0;
      const WeightedPointSet ws =
          ingest_weighted(e.in_path, e.weighted, e.ingest, &spec, &clamped);
      const nlohmann::json mj = read_json_file(e.model_path, "cli");
      double cost = 0.0;
      if (e.mode == "hard")
        cost = cost_hard(spec, ws, hard_model_from_json(mj));
      else
        cost = cost_soft(spec, ws, soft_model_from_json(mj));
      summary = {{"command", "eval"}, {"mode", e.mode}, {"cost", cost}};
    } else if (oc->parsed()) {
      const DivergenceSpec spec = load_divergence(o.divergence_path);
      long clamped = 0;
      nlohmann::json model_json;
      if (o.m > 0) {
        const PointSet ps = ingest_points(o.in_path, o.ingest, &spec, &clamped);
        const HardModel model = ptas(spec, ps, o.k, o.m, o.seed);
        const double cost = cost_hard(spec, unit_weights(ps), model);
        model_json = hard_model_to_json(model);
        summary = {{"command", "oracle"}, {"ptas", true}, {"m", o.m},
                   {"eps", o.eps > 0.0 ? nlohmann::json(o.eps) : nlohmann::json()},
                   {"cost", cost}};
      } else {
        const WeightedPointSet ws =
            ingest_weighted(o.in_path, o.weighted, o.ingest, &spec, &clamped);
        const ExhaustiveResult res = exhaustive_hard_optimum(spec, ws, o.k, o.guard);
        model_json = hard_model_to_json(res.model);
        summary = {{"command", "oracle"}, {"ptas", false}, {"cost", res.cost},
                   {"partitions", res.partitions_examined}};
      }
      if (!o.out_path.empty()) write_json_file(model_json, o.out_path, "cli");
    } else if (ex->parsed()) {
      ExperimentConfig cfg = load_experiment_config(x.config_path);
      if (x.threads > 0) cfg.threads = x.threads;
      if (x.verbose)
        err << "experiment: " << cfg.trials << " trials, " << cfg.sizes.size()
            << " sizes, mode " << mode_name(cfg.mode) << ", threads " << cfg.threads << "\n";
      const ExperimentResult result = run_experiment(cfg);
      const std::string trials_path = x.out_prefix + "_trials.csv";
      const std::string summary_path = x.out_prefix + "_summary.csv";
      write_trials_csv(result, trials_path);
      write_summary_csv(result, summary_path);
      summary = {{"command", "experiment"},
                 {"trials_csv", trials_path},
                 {"summary_csv", summary_path},
                 {"c_full_mean", result.c_full_mean},
                 {"failed_trials", result.failed_trials},
                 {"clamped", result.clamped_coordinates}};
    }

    out << summary.dump() << "\n";
    return 0;
  } catch (const std::exception& ex_err) {
    err << ex_err.what() << "\n";
    return 2;
  }
}

}  // namespace bregman
