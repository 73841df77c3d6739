#ifndef BREGMAN_SAMPLING_HPP
#define BREGMAN_SAMPLING_HPP

#include <cstdint>
#include <vector>

#include "bregman/common.hpp"
#include "bregman/data.hpp"
#include "bregman/divergence.hpp"
#include "bregman/rng.hpp"
#include "json.hpp"

namespace bregman {

struct D2Result {
  RowMatrix centers;            // k x d, rows of the input set
  std::vector<Index> chosen;    // source row indices, in pick order
  bool degenerate = false;      // all residual mass hit zero before k picks
};

/// Adaptive seeding under the squared Mahalanobis distance of `factor`: first
/// center uniform, each next one proportional to the current squared distance
/// to the chosen set. Minimum distances are maintained incrementally, so the
/// whole run is O(nkd). Optional per-point weights scale every pick
/// probability (weighted-uniform first pick included).
D2Result d2_sample_weighted(const RowMatrix& points, const Eigen::VectorXd* weights, Index k,
                            const MahalanobisFactor& factor, RandomStream& rng);

D2Result d2_sample(const PointSet& ps, Index k, const MahalanobisFactor& factor,
                   std::uint64_t seed);

/// Rough (bicriteria) clustering kept from the best of `runs` seeding passes.
struct BicriteriaSolution {
  RowMatrix centers;                      // beta x d (beta = k)
  double cost = 0.0;                      // mean squared Mahalanobis quantization error
  std::vector<std::vector<Index>> cells;  // nearest-center partition, ties to lowest index
  std::vector<int> assignment;            // per-point cell id
  Eigen::VectorXd closest_sq_dist;        // per-point distance to the center set
  bool degenerate = false;
};

BicriteriaSolution best_bicriteria(const PointSet& ps, Index k, const MahalanobisFactor& factor,
                                   int runs, std::uint64_t seed);

struct SensitivityTable {
  Eigen::VectorXd s;          // per-point sensitivity bound
  Eigen::VectorXd p;          // s normalized to a distribution
  double total = 0.0;         // sum(s) / n
  double alpha = 0.0;         // 16 (log2 k + 2)
  double c_phi = 0.0;         // the bicriteria solution's mean quantization error
  bool uniform_fallback = false;  // zero quantization error; p fell back to uniform
};

/// Per-point sensitivity bounds from a bicriteria solution:
///   s(x) = alpha d(x,B)/c + 2 alpha sum_{x' in cell} d(x',B) / (|cell| c) + 4 n / |cell|
/// with alpha = 16 (log2 k + 2) and c the mean quantization error.
SensitivityTable sensitivities(const BicriteriaSolution& solution, Index k);

/// m i.i.d. draws from table.p; each draw carries weight 1/(m p), duplicates
/// merged by summing. Output rows keep the source order.
WeightedPointSet sample_coreset(const PointSet& ps, const SensitivityTable& table, Index m,
                                std::uint64_t seed);

/// Full pipeline: seeding, sensitivities, importance sample.
WeightedPointSet build_coreset(const PointSet& ps, Index k, Index m,
                               const MahalanobisFactor& factor, int runs, std::uint64_t seed);

/// Same pipeline, keeping the intermediate stages for diagnostics.
struct CoresetBuild {
  WeightedPointSet coreset;
  BicriteriaSolution solution;
  SensitivityTable table;
};
CoresetBuild build_coreset_detailed(const PointSet& ps, Index k, Index m,
                                    const MahalanobisFactor& factor, int runs,
                                    std::uint64_t seed);

/// m uniform draws with replacement, weight n/m each, duplicates merged.
WeightedPointSet uniform_subsample(const PointSet& ps, Index m, std::uint64_t seed);

nlohmann::json sensitivity_to_json(const SensitivityTable& table);

}  // namespace bregman

#endif
