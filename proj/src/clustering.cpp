#include "bregman/clustering.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>

#include "bregman/rng.hpp"
#include "bregman/sampling.hpp"

namespace bregman {

SoftModel SoftModel::from_weights(const Eigen::VectorXd& weights, RowMatrix centers) {
  if (weights.size() != centers.rows())
    throw std::invalid_argument("clustering: weight/center count mismatch");
  if (weights.size() < 1) throw std::invalid_argument("clustering: model needs k >= 1");
  for (Index j = 0; j < weights.size(); ++j)
    if (!(weights(j) > 0.0) || !std::isfinite(weights(j)))
      throw std::invalid_argument("clustering: mixture weights must be positive and finite");
  const double total = weights.sum();
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("clustering: mixture weights must sum to 1");
  SoftModel m;
  m.log_weights_ = (weights / total).array().log();
  m.centers_ = std::move(centers);
  return m;
}

SoftModel SoftModel::from_log_weights(Eigen::VectorXd log_weights, RowMatrix centers) {
  if (log_weights.size() != centers.rows())
    throw std::invalid_argument("clustering: weight/center count mismatch");
  SoftModel m;
  m.log_weights_ = std::move(log_weights);
  m.centers_ = std::move(centers);
  return m;
}

namespace {

void require_rows_in_domain(const DivergenceSpec& spec, const RowMatrix& rows, const char* who) {
  for (Index i = 0; i < rows.rows(); ++i) spec.require_in_domain(row_span(rows, i), who);
}

// Weighted means of in-domain points are in-domain, but the accumulated sum
// can land an ulp outside the box; snap it back.
void clamp_rows_to_box(const DivergenceSpec& spec, RowMatrix& rows) {
  if (!spec.has_box()) return;
  rows = rows.cwiseMax(spec.domain_low()).cwiseMin(spec.domain_high());
}

// Nearest-center pass: fills assignment and per-point min divergence, returns
// the weighted mean cost. Ties stay with the lowest center index.
double assign_pass(const DivergenceSpec& spec, const WeightedPointSet& ws,
                   const RowMatrix& centers, std::vector<int>& assignment,
                   Eigen::VectorXd& min_div) {
  const Index m = ws.m();
  const Index k = centers.rows();
  double cost = 0.0;
  for (Index i = 0; i < m; ++i) {
    const auto x = ws.row(i);
    double best = std::numeric_limits<double>::infinity();
    Index best_j = 0;
    for (Index j = 0; j < k; ++j) {
      const double d = bregman_closed_unchecked(spec, x, row_span(centers, j));
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    assignment[i] = static_cast<int>(best_j);
    min_div(i) = best;
    cost += ws.weights(i) * best;
  }
  return cost / static_cast<double>(ws.origin_n);
}

}  // namespace

double cost_hard(const DivergenceSpec& spec, const WeightedPointSet& ws, const HardModel& model) {
  if (model.k() < 1) throw std::invalid_argument("clustering: model needs k >= 1");
  if (ws.dim() != spec.dim() || model.centers.cols() != spec.dim())
    throw std::invalid_argument("clustering: cost_hard dimension mismatch");
  require_rows_in_domain(spec, ws.points, "cost_hard");
  require_rows_in_domain(spec, model.centers, "cost_hard");
  std::vector<int> assignment(ws.m());
  Eigen::VectorXd min_div(ws.m());
  return assign_pass(spec, ws, model.centers, assignment, min_div);
}

std::pair<HardModel, FitReport> lloyd_bregman(const DivergenceSpec& spec,
                                              const WeightedPointSet& ws, HardModel init,
                                              double tol, int max_iter) {
  const Index k = init.k();
  if (k < 1) throw std::invalid_argument("clustering: lloyd_bregman needs k >= 1");
  if (ws.dim() != spec.dim() || init.centers.cols() != spec.dim())
    throw std::invalid_argument("clustering: lloyd_bregman dimension mismatch");
  if (max_iter < 1) throw std::invalid_argument("clustering: max_iter must be >= 1");
  require_rows_in_domain(spec, ws.points, "lloyd_bregman");
  require_rows_in_domain(spec, init.centers, "lloyd_bregman");

  const Index m = ws.m();
  RowMatrix centers = std::move(init.centers);
  std::vector<int> assignment(m);
  Eigen::VectorXd min_div(m);
  FitReport report;

  double cost_prev = assign_pass(spec, ws, centers, assignment, min_div);
  report.cost_trace.push_back(cost_prev);

  for (int it = 1; it <= max_iter; ++it) {
    // M step: weighted means per cell.
    RowMatrix sums = RowMatrix::Zero(k, ws.dim());
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(k);
    for (Index i = 0; i < m; ++i) {
      const int j = assignment[i];
      sums.row(j) += ws.weights(i) * ws.points.row(i);
      mass(j) += ws.weights(i);
    }
    bool reseeded = false;
    std::vector<Index> taken;
    for (Index j = 0; j < k; ++j) {
      if (mass(j) > 0.0) {
        centers.row(j) = sums.row(j) / mass(j);
        continue;
      }
      // Empty cluster: restart it at the worst-represented point.
      Index worst = -1;
      double worst_div = -1.0;
      for (Index i = 0; i < m; ++i) {
        if (std::find(taken.begin(), taken.end(), i) != taken.end()) continue;
        if (min_div(i) > worst_div) {
          worst_div = min_div(i);
          worst = i;
        }
      }
      if (worst < 0) continue;  // fewer points than clusters; keep the old center
      centers.row(j) = ws.points.row(worst);
      taken.push_back(worst);
      reseeded = true;
    }
    clamp_rows_to_box(spec, centers);

    const double cost_now = assign_pass(spec, ws, centers, assignment, min_div);
    report.cost_trace.push_back(cost_now);
    report.iterations = it;
    if (reseeded) {
      ++report.reseed_events;
      cost_prev = cost_now;
      continue;
    }
    const double rel = (cost_prev - cost_now) / std::max(cost_prev, DBL_MIN);
    if (rel < tol) {
      report.converged = true;
      break;
    }
    cost_prev = cost_now;
  }

  return {HardModel{std::move(centers)}, std::move(report)};
}

namespace {

// Log-domain E pass: returns the soft cost at `model` and fills the M-step
// accumulators plus the index of the costliest point (for re-seeding).
struct EPass {
  double cost = 0.0;
  Eigen::VectorXd mass;      // sum_i u_i eta_ij
  RowMatrix weighted_sum;    // sum_i u_i eta_ij x_i
  Index costliest = 0;
};

EPass e_pass(const DivergenceSpec& spec, const WeightedPointSet& ws, const SoftModel& model) {
  const Index m = ws.m();
  const Index k = model.k();
  EPass out;
  out.mass = Eigen::VectorXd::Zero(k);
  out.weighted_sum = RowMatrix::Zero(k, ws.dim());
  double worst = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd logits(k);
  Eigen::VectorXd eta(k);
  for (Index i = 0; i < m; ++i) {
    const auto x = ws.row(i);
    double shift = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) {
      logits(j) = model.log_weights()(j) - bregman_closed_unchecked(spec, x, model.center(j));
      shift = std::max(shift, logits(j));
    }
    double norm = 0.0;
    for (Index j = 0; j < k; ++j) {
      eta(j) = std::exp(logits(j) - shift);
      norm += eta(j);
    }
    const double point_cost = -(shift + std::log(norm));
    out.cost += ws.weights(i) * point_cost;
    if (point_cost > worst) {
      worst = point_cost;
      out.costliest = i;
    }
    for (Index j = 0; j < k; ++j) {
      const double r = ws.weights(i) * eta(j) / norm;
      out.mass(j) += r;
      out.weighted_sum.row(j) += r * ws.points.row(i);
    }
  }
  return out;
}

}  // namespace

double cost_soft(const DivergenceSpec& spec, const WeightedPointSet& ws, const SoftModel& model) {
  if (model.k() < 1) throw std::invalid_argument("clustering: model needs k >= 1");
  if (ws.dim() != spec.dim() || model.centers().cols() != spec.dim())
    throw std::invalid_argument("clustering: cost_soft dimension mismatch");
  require_rows_in_domain(spec, ws.points, "cost_soft");
  require_rows_in_domain(spec, model.centers(), "cost_soft");
  const Index k = model.k();
  Eigen::VectorXd logits(k);
  double cost = 0.0;
  for (Index i = 0; i < ws.m(); ++i) {
    const auto x = ws.row(i);
    double shift = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) {
      logits(j) = model.log_weights()(j) - bregman_closed_unchecked(spec, x, model.center(j));
      shift = std::max(shift, logits(j));
    }
    double norm = 0.0;
    for (Index j = 0; j < k; ++j) norm += std::exp(logits(j) - shift);
    cost += ws.weights(i) * -(shift + std::log(norm));
  }
  return cost;
}

Eigen::VectorXd responsibilities(const DivergenceSpec& spec, std::span<const double> x,
                                 const SoftModel& model) {
  spec.require_in_domain(x, "responsibilities");
  require_rows_in_domain(spec, model.centers(), "responsibilities");
  const Index k = model.k();
  Eigen::VectorXd logits(k);
  double shift = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < k; ++j) {
    logits(j) = model.log_weights()(j) - bregman_closed_unchecked(spec, x, model.center(j));
    shift = std::max(shift, logits(j));
  }
  Eigen::VectorXd eta(k);
  double norm = 0.0;
  for (Index j = 0; j < k; ++j) {
    eta(j) = std::exp(logits(j) - shift);
    norm += eta(j);
  }
  return eta / norm;
}

std::pair<SoftModel, FitReport> em_bregman(const DivergenceSpec& spec,
                                           const WeightedPointSet& ws, SoftModel init,
                                           double tol, int max_iter) {
  const Index k = init.k();
  if (k < 1) throw std::invalid_argument("clustering: em_bregman needs k >= 1");
  if (ws.dim() != spec.dim() || init.centers().cols() != spec.dim())
    throw std::invalid_argument("clustering: em_bregman dimension mismatch");
  if (max_iter < 1) throw std::invalid_argument("clustering: max_iter must be >= 1");
  require_rows_in_domain(spec, ws.points, "em_bregman");
  require_rows_in_domain(spec, init.centers(), "em_bregman");

  const double total_weight = ws.weights.sum();
  SoftModel model = std::move(init);
  FitReport report;

  EPass pass = e_pass(spec, ws, model);
  double cost_prev = pass.cost;
  report.cost_trace.push_back(cost_prev);

  for (int it = 1; it <= max_iter; ++it) {
    // M step.
    RowMatrix centers(k, ws.dim());
    Eigen::VectorXd weights(k);
    bool reseeded = false;
    for (Index j = 0; j < k; ++j) {
      if (pass.mass(j) < 1e-12 * total_weight) {
        centers.row(j) = ws.points.row(pass.costliest);
        weights(j) = 1e-6;
        reseeded = true;
      } else {
        centers.row(j) = pass.weighted_sum.row(j) / pass.mass(j);
        weights(j) = pass.mass(j) / total_weight;
      }
    }
    weights /= weights.sum();
    clamp_rows_to_box(spec, centers);
    model = SoftModel::from_log_weights(weights.array().log(), std::move(centers));

    pass = e_pass(spec, ws, model);
    report.cost_trace.push_back(pass.cost);
    report.iterations = it;
    if (reseeded) {
      ++report.reseed_events;
      cost_prev = pass.cost;
      continue;
    }
    const double rel = (cost_prev - pass.cost) / std::max(std::abs(cost_prev), DBL_MIN);
    if (rel < tol) {
      report.converged = true;
      break;
    }
    cost_prev = pass.cost;
  }

  return {std::move(model), std::move(report)};
}

HardModel seed_hard(const DivergenceSpec& spec, const WeightedPointSet& ws, Index k,
                    std::uint64_t seed) {
  if (k > ws.m()) throw std::invalid_argument("clustering: seed_hard needs k <= m");
  RandomStream rng(seed);
  D2Result run = d2_sample_weighted(ws.points, &ws.weights, k, spec.similarity().factor, rng);
  return HardModel{std::move(run.centers)};
}

SoftModel seed_soft(const DivergenceSpec& spec, const WeightedPointSet& ws, Index k,
                    std::uint64_t seed) {
  HardModel hard = seed_hard(spec, ws, k, seed);
  const Eigen::VectorXd weights =
      Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  return SoftModel::from_weights(weights, std::move(hard.centers));
}

nlohmann::json hard_model_to_json(const HardModel& model) {
  nlohmann::json j;
  j["k"] = model.k();
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < model.k(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < model.centers.cols(); ++c) row.push_back(model.centers(i, c));
    rows.push_back(std::move(row));
  }
  j["centers"] = std::move(rows);
  return j;
}

static RowMatrix centers_from_json(const nlohmann::json& rows) {
  if (!rows.is_array() || rows.empty()) throw ParseError("clustering: centers must be a nonempty array");
  const Index k = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows[0].size());
  RowMatrix centers(k, d);
  for (Index i = 0; i < k; ++i) {
    if (static_cast<Index>(rows[i].size()) != d)
      throw ParseError("clustering: ragged center rows");
    for (Index c = 0; c < d; ++c) centers(i, c) = rows[i][c].get<double>();
  }
  return centers;
}

HardModel hard_model_from_json(const nlohmann::json& j) {
  try {
    HardModel model{centers_from_json(j.at("centers"))};
    if (j.contains("k") && j.at("k").get<Index>() != model.k())
      throw ParseError("clustering: k does not match center count");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("clustering: bad hard model JSON: ") + e.what());
  }
}

nlohmann::json soft_model_to_json(const SoftModel& model) {
  nlohmann::json j;
  j["k"] = model.k();
  const Eigen::VectorXd w = model.weights();
  j["weights"] = std::vector<double>(w.data(), w.data() + w.size());
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < model.k(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < model.centers().cols(); ++c) row.push_back(model.centers()(i, c));
    rows.push_back(std::move(row));
  }
  j["centers"] = std::move(rows);
  return j;
}

SoftModel soft_model_from_json(const nlohmann::json& j) {
  try {
    RowMatrix centers = centers_from_json(j.at("centers"));
    const auto wv = j.at("weights").get<std::vector<double>>();
    Eigen::VectorXd weights = Eigen::Map<const Eigen::VectorXd>(wv.data(), wv.size());
    return SoftModel::from_weights(weights, std::move(centers));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("clustering: bad soft model JSON: ") + e.what());
  }
}

nlohmann::json fit_report_to_json(const FitReport& report) {
  nlohmann::json j;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["reseed_events"] = report.reseed_events;
  j["cost_trace"] = report.cost_trace;
  return j;
}

}  // namespace bregman
