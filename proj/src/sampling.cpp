#include "bregman/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace bregman {

D2Result d2_sample_weighted(const RowMatrix& points, const Eigen::VectorXd* weights, Index k,
                            const MahalanobisFactor& factor, RandomStream& rng) {
  const Index n = points.rows();
  if (k < 1) throw std::invalid_argument("sampling: k must be >= 1");
  if (k > n) throw std::invalid_argument("sampling: k exceeds the number of points");
  if (weights && weights->size() != n)
    throw std::invalid_argument("sampling: weight vector length mismatch");

  D2Result result;
  result.centers.resize(k, points.cols());
  result.chosen.reserve(k);

  std::vector<double> cumulative(n);
  const auto pick_proportional = [&](const auto& mass_at) -> Index {
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      acc += mass_at(i);
      cumulative[i] = acc;
    }
    if (!(acc > 0.0)) return -1;
    return static_cast<Index>(sample_cumulative(cumulative, rng));
  };

  // First pick: (weighted-)uniform.
  Index first;
  if (weights) {
    first = pick_proportional([&](Index i) { return (*weights)(i); });
    if (first < 0) throw std::invalid_argument("sampling: weights sum to zero");
  } else {
    first = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
  }
  result.chosen.push_back(first);
  result.centers.row(0) = points.row(first);

  Eigen::VectorXd min_dist(n);
  for (Index i = 0; i < n; ++i)
    min_dist(i) = factor.distance(row_span(points, i), row_span(points, first));

  for (Index c = 1; c < k; ++c) {
    const Index pick = weights
        ? pick_proportional([&](Index i) { return (*weights)(i) * min_dist(i); })
        : pick_proportional([&](Index i) { return min_dist(i); });
    Index chosen = pick;
    if (pick < 0) {
      // Every residual distance is zero: the data has at most c distinct
      // locations. Fall back to uniform picks for the remaining centers.
      result.degenerate = true;
      chosen = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    result.chosen.push_back(chosen);
    result.centers.row(c) = points.row(chosen);
    if (pick >= 0) {
      const auto center = row_span(points, chosen);
      for (Index i = 0; i < n; ++i) {
        const double d = factor.distance(row_span(points, i), center);
        if (d < min_dist(i)) min_dist(i) = d;
      }
    }
  }
  return result;
}

D2Result d2_sample(const PointSet& ps, Index k, const MahalanobisFactor& factor,
                   std::uint64_t seed) {
  RandomStream rng(seed);
  return d2_sample_weighted(ps.points, nullptr, k, factor, rng);
}

namespace {

BicriteriaSolution partition_around(const PointSet& ps, D2Result&& run,
                                    const MahalanobisFactor& factor) {
  const Index n = ps.n();
  const Index k = run.centers.rows();
  BicriteriaSolution sol;
  sol.centers = std::move(run.centers);
  sol.degenerate = run.degenerate;
  sol.cells.assign(k, {});
  sol.assignment.resize(n);
  sol.closest_sq_dist.resize(n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    Index best_j = 0;
    for (Index j = 0; j < k; ++j) {
      const double d = factor.distance(ps.row(i), row_span(sol.centers, j));
      if (d < best) {  // strict: ties stay with the lowest center index
        best = d;
        best_j = j;
      }
    }
    sol.assignment[i] = static_cast<int>(best_j);
    sol.cells[best_j].push_back(i);
    sol.closest_sq_dist(i) = best;
    total += best;
  }
  sol.cost = total / static_cast<double>(n);
  return sol;
}

}  // namespace

BicriteriaSolution best_bicriteria(const PointSet& ps, Index k, const MahalanobisFactor& factor,
                                   int runs, std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("sampling: runs must be >= 1");
  double best_cost = std::numeric_limits<double>::infinity();
  D2Result best_run;
  for (int r = 0; r < runs; ++r) {
    RandomStream rng(derive_seed(seed, 0xd2, static_cast<std::uint64_t>(r)));
    D2Result run = d2_sample_weighted(ps.points, nullptr, k, factor, rng);
    if (runs == 1) {
      best_run = std::move(run);
      break;
    }
    double total = 0.0;
    for (Index i = 0; i < ps.n(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < k; ++j)
        best = std::min(best, factor.distance(ps.row(i), row_span(run.centers, j)));
      total += best;
    }
    if (total < best_cost) {
      best_cost = total;
      best_run = std::move(run);
    }
  }
  return partition_around(ps, std::move(best_run), factor);
}

SensitivityTable sensitivities(const BicriteriaSolution& solution, Index k) {
  if (k < 1) throw std::invalid_argument("sampling: k must be >= 1");
  const Index n = solution.closest_sq_dist.size();
  if (n < 1) throw std::invalid_argument("sampling: empty bicriteria solution");
  SensitivityTable table;
  table.alpha = 16.0 * (std::log2(static_cast<double>(k)) + 2.0);
  table.c_phi = solution.cost;
  table.s.resize(n);

  if (!(solution.cost > 0.0)) {
    // Every point sits on a center; the sensitivity terms degenerate to 0/0.
    // Fall back to a uniform proposal.
    table.uniform_fallback = true;
    table.s.setConstant(2.0 * table.alpha + 4.0);
  } else {
    const double alpha = table.alpha;
    const double c = solution.cost;
    for (std::size_t cell_id = 0; cell_id < solution.cells.size(); ++cell_id) {
      const auto& cell = solution.cells[cell_id];
      if (cell.empty()) continue;
      double cell_sum = 0.0;
      for (Index i : cell) cell_sum += solution.closest_sq_dist(i);
      const double cell_size = static_cast<double>(cell.size());
      const double shared = 2.0 * alpha * cell_sum / (cell_size * c) +
                            4.0 * static_cast<double>(n) / cell_size;
      for (Index i : cell)
        table.s(i) = alpha * solution.closest_sq_dist(i) / c + shared;
    }
  }

  const double sum = table.s.sum();
  table.p = table.s / sum;
  table.total = sum / static_cast<double>(n);
  return table;
}

WeightedPointSet sample_coreset(const PointSet& ps, const SensitivityTable& table, Index m,
                                std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sampling: coreset size must be >= 1");
  const Index n = ps.n();
  if (table.p.size() != n)
    throw std::invalid_argument("sampling: sensitivity table size mismatch");
  RandomStream rng(seed);
  std::vector<double> cumulative(n);
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    acc += table.p(i);
    cumulative[i] = acc;
  }
  std::map<Index, long> draws;  // ordered: output rows keep source order
  for (Index t = 0; t < m; ++t)
    ++draws[static_cast<Index>(sample_cumulative(cumulative, rng))];

  WeightedPointSet ws;
  ws.points.resize(static_cast<Index>(draws.size()), ps.dim());
  ws.weights.resize(static_cast<Index>(draws.size()));
  Index row = 0;
  for (const auto& [idx, count] : draws) {
    ws.points.row(row) = ps.points.row(idx);
    ws.weights(row) = static_cast<double>(count) / (static_cast<double>(m) * table.p(idx));
    ++row;
  }
  ws.origin_n = n;
  return ws;
}

CoresetBuild build_coreset_detailed(const PointSet& ps, Index k, Index m,
                                    const MahalanobisFactor& factor, int runs,
                                    std::uint64_t seed) {
  CoresetBuild build;
  build.solution = best_bicriteria(ps, k, factor, runs, derive_seed(seed, 0xb1c));
  build.table = sensitivities(build.solution, k);
  build.coreset = sample_coreset(ps, build.table, m, derive_seed(seed, 0xc04e));
  return build;
}

WeightedPointSet build_coreset(const PointSet& ps, Index k, Index m,
                               const MahalanobisFactor& factor, int runs, std::uint64_t seed) {
  return build_coreset_detailed(ps, k, m, factor, runs, seed).coreset;
}

WeightedPointSet uniform_subsample(const PointSet& ps, Index m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sampling: subsample size must be >= 1");
  const Index n = ps.n();
  RandomStream rng(seed);
  std::map<Index, long> draws;
  for (Index t = 0; t < m; ++t)
    ++draws[static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))];

  WeightedPointSet ws;
  ws.points.resize(static_cast<Index>(draws.size()), ps.dim());
  ws.weights.resize(static_cast<Index>(draws.size()));
  const double per_draw = static_cast<double>(n) / static_cast<double>(m);
  Index row = 0;
  for (const auto& [idx, count] : draws) {
    ws.points.row(row) = ps.points.row(idx);
    ws.weights(row) = static_cast<double>(count) * per_draw;
    ++row;
  }
  ws.origin_n = n;
  return ws;
}

nlohmann::json sensitivity_to_json(const SensitivityTable& table) {
  nlohmann::json j;
  j["alpha"] = table.alpha;
  j["c_phi"] = table.c_phi;
  j["total"] = table.total;
  j["uniform_fallback"] = table.uniform_fallback;
  j["s"] = std::vector<double>(table.s.data(), table.s.data() + table.s.size());
  j["p"] = std::vector<double>(table.p.data(), table.p.data() + table.p.size());
  return j;
}

}  // namespace bregman
