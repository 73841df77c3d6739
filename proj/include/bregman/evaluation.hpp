#ifndef BREGMAN_EVALUATION_HPP
#define BREGMAN_EVALUATION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bregman/clustering.hpp"
#include "bregman/common.hpp"
#include "bregman/data.hpp"
#include "bregman/divergence.hpp"
#include "json.hpp"

namespace bregman {

struct ExhaustiveResult {
  HardModel model;  // min(k, m) centers; duplicates add nothing to the cost
  double cost = 0.0;
  std::uint64_t partitions_examined = 0;
};

/// Exact optimum by enumerating every partition of the points into at most k
/// nonempty blocks (restricted-growth strings) and taking each block's
/// weighted mean as its center. Refuses instances whose partition count
/// exceeds `guard`.
ExhaustiveResult exhaustive_hard_optimum(const DivergenceSpec& spec, const WeightedPointSet& ws,
                                         Index k, std::uint64_t guard = 10'000'000);

/// Number of partitions of m items into at most k nonempty blocks, saturating
/// at 2 * guard-ish magnitudes (used for the feasibility check).
double partition_count(Index m, Index k);

/// Approximation by exhaustive search over a coreset of size m. When m >= n
/// the data itself serves as the (exact) coreset; otherwise an importance
/// sample is drawn. Desk scale only: the coreset must pass the exhaustive
/// guard.
HardModel ptas(const DivergenceSpec& spec, const PointSet& ps, Index k, Index m,
               std::uint64_t seed);

/// (c_ss - c_full) / c_full; c_full must be positive.
double relative_error(double c_ss, double c_full);

enum class FitMode { Hard, Soft };
enum class Method { Coreset, Uniform, Full };

std::string method_name(Method m);
std::string mode_name(FitMode m);

struct GeneratorConfig {
  std::string kind;  // "gaussian" or "poisson"
  Index n = 0;
  Index k = 0;
  Index d = 0;
  std::uint64_t seed = 0;
  double dirichlet_alpha = 0.5;
  double mean_var = 5000.0;
  double comp_var = 1.0;
  double gamma_shape = 10.0;
  double gamma_rate = 1e-3;
};

struct DatasetSource {
  std::optional<std::string> file;
  std::optional<GeneratorConfig> generator;
};

struct ExperimentConfig {
  DatasetSource dataset;
  DivergenceSpec divergence = DivergenceSpec::squared_euclidean(1);
  Index k = 1;
  std::vector<Index> sizes;
  int trials = 1;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::Coreset, Method::Uniform, Method::Full};
  FitMode mode = FitMode::Hard;
  double tol = 1e-6;
  int max_iter = 100;
  int bicriteria_runs = 1;
  bool standardize = false;
  int threads = 1;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

struct TrialRecord {
  Method method = Method::Full;
  Index size = 0;
  int trial = 0;
  double eta = 0.0;
  double subsample_seconds = 0.0;
  double fit_seconds = 0.0;
  double cost_ss = 0.0;
  double cost_full = 0.0;  // the mean full-data cost used as the denominator
};

struct SummaryRow {
  Method method = Method::Full;
  Index size = 0;
  double eta_mean = 0.0;
  double eta_ci = 0.0;  // 1.96 sd / sqrt(r)
  double half_time_mean = 0.0;  // mean (subsample + fit) wall time
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  std::vector<SummaryRow> summary;
  double c_full_mean = 0.0;
  int failed_trials = 0;
  long clamped_coordinates = 0;
};

/// Seed derivations shared by the harness and by anyone replaying a single
/// trial through the standalone pipeline (subsample seed, fit seed).
std::uint64_t experiment_full_seed(std::uint64_t master, int trial);
std::pair<std::uint64_t, std::uint64_t> experiment_trial_seeds(std::uint64_t master,
                                                               Method method, int size_index,
                                                               int trial);

/// Runs the coreset-vs-uniform protocol: per trial and size, build the
/// subsample, seed adaptively, fit, and evaluate the model on the full set;
/// full-data fits run `trials` times independently and their mean cost is the
/// error denominator. Deterministic given the seed regardless of threads
/// (timing fields excepted).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_trials_csv(const ExperimentResult& result, const std::string& path);
void write_summary_csv(const ExperimentResult& result, const std::string& path);

}  // namespace bregman

#endif
