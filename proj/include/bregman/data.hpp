#ifndef BREGMAN_DATA_HPP
#define BREGMAN_DATA_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "bregman/common.hpp"
#include "bregman/divergence.hpp"

namespace bregman {

enum class PointFormat { Csv };

struct PointSet {
  RowMatrix points;  // n x d, one point per row

  Index n() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  std::span<const double> row(Index i) const { return row_span(points, i); }
};

/// Weighted summary of a (possibly larger) set of origin_n points. Raw data
/// wraps as unit weights with origin_n = m.
struct WeightedPointSet {
  RowMatrix points;         // m x d
  Eigen::VectorXd weights;  // m positive entries
  std::int64_t origin_n = 0;

  Index m() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  std::span<const double> row(Index i) const { return row_span(points, i); }
  double total_weight() const { return weights.sum(); }
};

WeightedPointSet unit_weights(const PointSet& ps);

/// Ground truth of a synthetic mixture draw.
struct MixtureTruth {
  Eigen::VectorXd component_weights;  // k-simplex
  RowMatrix component_params;         // k x d (means or rates)
  std::vector<int> assignment;        // n labels in [0, k)
};

PointSet load_points(const std::string& path, PointFormat format = PointFormat::Csv);
void save_points(const PointSet& ps, const std::string& path);

struct ClampedPoints {
  PointSet points;
  long clamped_coordinates = 0;
};

/// Clamps every coordinate into the spec's box domain. The spec must have one.
ClampedPoints clamp_to_domain(const PointSet& ps, const DivergenceSpec& spec);

/// Column-wise z-scoring; zero-variance columns are centered only.
PointSet standardize(const PointSet& ps);

/// Isotropic Gaussian mixture: weights ~ Dirichlet(alpha 1_k), component means
/// i.i.d. N(0, mean_var I), points N(mean_label, comp_var I).
std::pair<PointSet, MixtureTruth> gen_gaussian_mixture(std::uint64_t seed, Index n, Index k,
                                                       Index d, double dirichlet_alpha,
                                                       double mean_var, double comp_var);

/// Multivariate Poisson mixture with uniform component weights; per-component
/// per-dimension rates ~ Gamma(shape, rate); counts stored as doubles.
std::pair<PointSet, MixtureTruth> gen_poisson_mixture(std::uint64_t seed, Index n, Index k,
                                                      Index d, double gamma_shape,
                                                      double gamma_rate);

/// Weighted CSV (weight in the final column) plus a "<path>.json" sidecar
/// carrying origin_n.
void save_weighted(const WeightedPointSet& ws, const std::string& path);
WeightedPointSet load_weighted(const std::string& path);

}  // namespace bregman

#endif
