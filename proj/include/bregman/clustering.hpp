#ifndef BREGMAN_CLUSTERING_HPP
#define BREGMAN_CLUSTERING_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "bregman/common.hpp"
#include "bregman/data.hpp"
#include "bregman/divergence.hpp"
#include "json.hpp"

namespace bregman {

struct HardModel {
  RowMatrix centers;  // k x d

  Index k() const { return centers.rows(); }
  std::span<const double> center(Index j) const { return row_span(centers, j); }
};

/// Mixture weights kept as logs so strictly positive weights survive flooring
/// and renormalization exactly.
class SoftModel {
public:
  static SoftModel from_weights(const Eigen::VectorXd& weights, RowMatrix centers);
  static SoftModel from_log_weights(Eigen::VectorXd log_weights, RowMatrix centers);

  Index k() const { return centers_.rows(); }
  const RowMatrix& centers() const { return centers_; }
  std::span<const double> center(Index j) const { return row_span(centers_, j); }
  const Eigen::VectorXd& log_weights() const { return log_weights_; }
  Eigen::VectorXd weights() const { return log_weights_.array().exp(); }

private:
  Eigen::VectorXd log_weights_;
  RowMatrix centers_;
};

struct FitReport {
  int iterations = 0;
  std::vector<double> cost_trace;  // objective after each iteration; [0] is the initial cost
  bool converged = false;
  int reseed_events = 0;
};

/// Mean minimum divergence to the model's centers, weights summed and divided
/// by origin_n; with unit weights this is the plain average cost.
double cost_hard(const DivergenceSpec& spec, const WeightedPointSet& ws, const HardModel& model);

/// Weighted Lloyd alternation: nearest-center assignment (ties to the lowest
/// index), then weighted-mean center updates. Stops when the relative cost
/// decrease drops below tol or after max_iter iterations. An emptied cluster
/// is re-seeded at the point with the largest current divergence (counted in
/// the report; the descent guarantee restarts there).
std::pair<HardModel, FitReport> lloyd_bregman(const DivergenceSpec& spec,
                                              const WeightedPointSet& ws, HardModel init,
                                              double tol = 1e-6, int max_iter = 100);

/// Negative log mixture likelihood up to the model-independent base measure:
///   sum_i u_i * (-log sum_j w_j exp(-d(x_i, theta_j)))
/// evaluated in the log domain throughout.
double cost_soft(const DivergenceSpec& spec, const WeightedPointSet& ws, const SoftModel& model);

/// Posterior component memberships of a single point (softmax of
/// log w_j - d(x, theta_j)); sums to one exactly after normalization.
Eigen::VectorXd responsibilities(const DivergenceSpec& spec, std::span<const double> x,
                                 const SoftModel& model);

/// Weighted EM: E step scales responsibilities by point weights, M step takes
/// weight updates and responsibility-weighted means. A dying component (mass
/// below 1e-12 of the total) is re-seeded at the point with the largest
/// current cost and its weight floored at 1e-6 before renormalizing.
std::pair<SoftModel, FitReport> em_bregman(const DivergenceSpec& spec,
                                           const WeightedPointSet& ws, SoftModel init,
                                           double tol = 1e-6, int max_iter = 100);

/// Weighted adaptive seeding under the spec's similarity matrix.
HardModel seed_hard(const DivergenceSpec& spec, const WeightedPointSet& ws, Index k,
                    std::uint64_t seed);
/// Same centers plus uniform mixture weights.
SoftModel seed_soft(const DivergenceSpec& spec, const WeightedPointSet& ws, Index k,
                    std::uint64_t seed);

nlohmann::json hard_model_to_json(const HardModel& model);
HardModel hard_model_from_json(const nlohmann::json& j);
nlohmann::json soft_model_to_json(const SoftModel& model);
SoftModel soft_model_from_json(const nlohmann::json& j);
nlohmann::json fit_report_to_json(const FitReport& report);

}  // namespace bregman

#endif
