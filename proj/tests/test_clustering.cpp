#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>

#include "bregman/clustering.hpp"
#include "bregman/data.hpp"
#include "bregman/rng.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bregman;

namespace {

WeightedPointSet two_points() {
  PointSet ps;
  ps.points.resize(2, 2);
  ps.points << 0, 0, 2, 0;
  return unit_weights(ps);
}

WeightedPointSet rectangle() {
  PointSet ps;
  ps.points.resize(4, 2);
  ps.points << 0, 0, 0, 1, 10, 0, 10, 1;
  return unit_weights(ps);
}

// Non-increasing up to relative slack, ignoring restarts after re-seeds.
void check_monotone(const std::vector<double>& trace, int reseeds) {
  if (reseeds > 0) return;
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-9 * std::max(1.0, std::abs(trace[i - 1])));
}

double naive_soft_cost(const DivergenceSpec& spec, const WeightedPointSet& ws,
                       const SoftModel& model) {
  const Eigen::VectorXd w = model.weights();
  double cost = 0.0;
  for (Index i = 0; i < ws.m(); ++i) {
    double mix = 0.0;
    for (Index j = 0; j < model.k(); ++j)
      mix += w(j) * std::exp(-bregman_closed(spec, ws.row(i), model.center(j)));
    cost += ws.weights(i) * -std::log(mix);
  }
  return cost;
}

}  // namespace

TEST_CASE("cost_hard hand examples") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  const WeightedPointSet ws = two_points();
  HardModel mid;
  mid.centers.resize(1, 2);
  mid.centers << 1, 0;
  CHECK(cost_hard(spec, ws, mid) == doctest::Approx(1.0).epsilon(1e-15));

  HardModel cover;
  cover.centers = ws.points;
  CHECK(cost_hard(spec, ws, cover) == 0.0);

  // Doubling all weights and origin_n leaves the normalized cost unchanged.
  WeightedPointSet doubled = ws;
  doubled.weights *= 2.0;
  doubled.origin_n *= 2;
  CHECK(cost_hard(spec, doubled, mid) == doctest::Approx(1.0).epsilon(1e-15));

  const auto re = DivergenceSpec::relative_entropy(2, 0.1, 1.0);
  CHECK_THROWS_AS(cost_hard(re, ws, mid), DomainError);
}

TEST_CASE("lloyd converges immediately on a fixed point") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  const WeightedPointSet ws = two_points();
  HardModel init;
  init.centers = ws.points;
  const auto [model, report] = lloyd_bregman(spec, ws, init);
  CHECK(report.converged);
  CHECK(model.centers == ws.points);
  CHECK(report.cost_trace.back() == 0.0);
  CHECK(report.reseed_events == 0);
}

TEST_CASE("lloyd solves the rectangle instance") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  const WeightedPointSet ws = rectangle();
  HardModel init;
  init.centers.resize(2, 2);
  init.centers << 0, 0.4, 10, 0.7;
  const auto [model, report] = lloyd_bregman(spec, ws, init);
  CHECK(report.converged);
  CHECK(report.cost_trace.back() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(model.centers(0, 0) == doctest::Approx(0.0));
  CHECK(model.centers(0, 1) == doctest::Approx(0.5));
  CHECK(model.centers(1, 0) == doctest::Approx(10.0));
  CHECK(model.centers(1, 1) == doctest::Approx(0.5));
  check_monotone(report.cost_trace, report.reseed_events);
}

TEST_CASE("weight-3 point equals the point repeated three times") {
  const auto spec = DivergenceSpec::squared_euclidean(1);
  WeightedPointSet weighted;
  weighted.points.resize(3, 1);
  weighted.points << 0.3, 7.0, 9.0;
  weighted.weights.resize(3);
  weighted.weights << 3.0, 1.0, 1.0;
  weighted.origin_n = 5;

  WeightedPointSet repeated;
  repeated.points.resize(5, 1);
  repeated.points << 0.3, 0.3, 0.3, 7.0, 9.0;
  repeated.weights = Eigen::VectorXd::Ones(5);
  repeated.origin_n = 5;

  HardModel init;
  init.centers.resize(2, 1);
  init.centers << 0.0, 8.0;
  const auto [mw, rw] = lloyd_bregman(spec, weighted, init);
  const auto [mr, rr] = lloyd_bregman(spec, repeated, init);
  CHECK(mw.centers.isApprox(mr.centers, 1e-12));
  CHECK(rw.cost_trace.size() == rr.cost_trace.size());
  CHECK(rw.cost_trace.back() == doctest::Approx(rr.cost_trace.back()).epsilon(1e-12));

  SoftModel sinit = SoftModel::from_weights(Eigen::Vector2d(0.5, 0.5), init.centers);
  const auto [sw, srw] = em_bregman(spec, weighted, sinit);
  const auto [sr, srr] = em_bregman(spec, repeated, sinit);
  CHECK(sw.centers().isApprox(sr.centers(), 1e-10));
  CHECK(sw.weights().isApprox(sr.weights(), 1e-10));
}

TEST_CASE("lloyd re-seeds emptied clusters") {
  const auto spec = DivergenceSpec::squared_euclidean(1);
  WeightedPointSet ws;
  ws.points.resize(2, 1);
  ws.points << 0.0, 1.0;
  ws.weights = Eigen::VectorXd::Ones(2);
  ws.origin_n = 2;
  HardModel init;
  init.centers.resize(2, 1);
  init.centers << 0.5, 100.0;  // second center starts empty
  const auto [model, report] = lloyd_bregman(spec, ws, init);
  CHECK(report.reseed_events >= 1);
  CHECK(report.cost_trace.back() == 0.0);  // both points end on their own centers
}

TEST_CASE("cost_soft basics") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  const WeightedPointSet ws = two_points();
  RowMatrix center(1, 2);
  center << 1, 0;
  const SoftModel one = SoftModel::from_weights(Eigen::VectorXd::Ones(1), center);
  // k = 1: the soft cost is the plain summed divergence.
  CHECK(cost_soft(spec, ws, one) == doctest::Approx(2.0).epsilon(1e-12));

  RandomStream rng(3);
  for (int t = 0; t < 50; ++t) {
    RowMatrix centers(2, 2);
    for (int j = 0; j < 2; ++j) {
      centers(j, 0) = 4.0 * rng.uniform01() - 1.0;
      centers(j, 1) = 2.0 * rng.uniform01() - 1.0;
    }
    const double w0 = 0.2 + 0.6 * rng.uniform01();
    const SoftModel model = SoftModel::from_weights(Eigen::Vector2d(w0, 1.0 - w0), centers);
    const double soft = cost_soft(spec, ws, model);
    CHECK(soft >= 0.0);
    // Lower bound: the weighted hard cost without the 1/n factor.
    double hard_sum = 0.0;
    for (Index i = 0; i < ws.m(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < 2; ++j)
        best = std::min(best, bregman_closed(spec, ws.row(i), row_span(centers, j)));
      hard_sum += ws.weights(i) * best;
    }
    CHECK(soft >= hard_sum - 1e-9 * std::max(1.0, hard_sum));
  }
}

TEST_CASE("responsibilities") {
  const auto spec = DivergenceSpec::squared_euclidean(1);

  // Equal centers: responsibilities reduce to the mixture weights.
  RowMatrix same(2, 1);
  same << 5.0, 5.0;
  const SoftModel equal = SoftModel::from_weights(Eigen::Vector2d(0.3, 0.7), same);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.25);
  const Eigen::VectorXd eta = responsibilities(spec, vec_span(x), equal);
  CHECK(eta(0) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(eta(1) == doctest::Approx(0.7).epsilon(1e-12));

  // Distances (0, ln 3) at equal weights give the 3:1 softmax split.
  RowMatrix centers(2, 1);
  centers << 0.0, std::sqrt(std::log(3.0));
  const SoftModel model = SoftModel::from_weights(Eigen::Vector2d(0.5, 0.5), centers);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd split = responsibilities(spec, vec_span(zero), model);
  CHECK(split(0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(split(1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(std::abs(split.sum() - 1.0) <= 1e-12);

  // Huge distances must not underflow to NaN.
  RowMatrix far(2, 1);
  far << 0.0, 1e154;
  const SoftModel extreme = SoftModel::from_weights(Eigen::Vector2d(0.5, 0.5), far);
  const Eigen::VectorXd eta_far = responsibilities(spec, vec_span(zero), extreme);
  CHECK(eta_far(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eta_far(1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(std::isfinite(eta_far.sum()));
}

TEST_CASE("em with one component jumps to the weighted mean") {
  const auto spec = DivergenceSpec::squared_euclidean(1);
  WeightedPointSet ws;
  ws.points.resize(3, 1);
  ws.points << 0.0, 1.0, 5.0;
  ws.weights.resize(3);
  ws.weights << 1.0, 2.0, 1.0;
  ws.origin_n = 4;
  RowMatrix start(1, 1);
  start << 3.0;
  const SoftModel init = SoftModel::from_weights(Eigen::VectorXd::Ones(1), start);
  const auto [model, report] = em_bregman(spec, ws, init);
  const double mean = (0.0 * 1 + 1.0 * 2 + 5.0 * 1) / 4.0;
  CHECK(model.centers()(0, 0) == doctest::Approx(mean).epsilon(1e-15));
  CHECK(model.weights()(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("em recovers two well-separated 1-D gaussians") {
  RandomStream rng(71);
  PointSet ps;
  ps.points.resize(400, 1);
  for (Index i = 0; i < 200; ++i) ps.points(i, 0) = rng.normal();
  for (Index i = 200; i < 400; ++i) ps.points(i, 0) = 100.0 + rng.normal();
  const WeightedPointSet ws = unit_weights(ps);
  const auto spec = DivergenceSpec::squared_euclidean(1);

  const SoftModel init = seed_soft(spec, ws, 2, 12345);
  const auto [model, report] = em_bregman(spec, ws, init);
  std::vector<double> means{model.centers()(0, 0), model.centers()(1, 0)};
  std::sort(means.begin(), means.end());
  CHECK(std::abs(means[0] - 0.0) <= 1.0);
  CHECK(std::abs(means[1] - 100.0) <= 1.0);
  const Eigen::VectorXd w = model.weights();
  CHECK(std::abs(w(0) - 0.5) <= 0.1);
  check_monotone(report.cost_trace, report.reseed_events);
}

TEST_CASE("em cost trace descends on random instances") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  for (int t = 0; t < 10; ++t) {
    const auto [ps, truth] = gen_gaussian_mixture(500 + t, 120, 3, 2, 0.5, 50.0, 1.0);
    const WeightedPointSet ws = unit_weights(ps);
    const SoftModel init = seed_soft(spec, ws, 3, 900 + t);
    const auto [model, report] = em_bregman(spec, ws, init);
    check_monotone(report.cost_trace, report.reseed_events);

    const HardModel hinit = seed_hard(spec, ws, 3, 900 + t);
    const auto [hmodel, hreport] = lloyd_bregman(spec, ws, hinit);
    check_monotone(hreport.cost_trace, hreport.reseed_events);
  }
}

TEST_CASE("log-domain soft cost agrees with the naive form when it is finite") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  RandomStream rng(83);
  for (int t = 0; t < 30; ++t) {
    WeightedPointSet ws;
    ws.points.resize(20, 2);
    for (Index i = 0; i < 20; ++i)
      for (Index j = 0; j < 2; ++j) ws.points(i, j) = 4.0 * rng.uniform01() - 2.0;
    ws.weights = Eigen::VectorXd::Ones(20);
    ws.origin_n = 20;
    RowMatrix centers(3, 2);
    for (Index j = 0; j < 3; ++j)
      for (Index c = 0; c < 2; ++c) centers(j, c) = 4.0 * rng.uniform01() - 2.0;
    Eigen::Vector3d raw(rng.uniform01() + 0.1, rng.uniform01() + 0.1, rng.uniform01() + 0.1);
    const SoftModel model = SoftModel::from_weights(raw / raw.sum(), centers);
    // Distances stay below ~32 on this box, so the naive form cannot underflow.
    const double log_domain = cost_soft(spec, ws, model);
    const double naive = naive_soft_cost(spec, ws, model);
    CHECK(std::abs(log_domain - naive) <= 1e-9 * std::max(1.0, std::abs(naive)));
  }
}

TEST_CASE("per-point soft cost obeys the similarity sandwich") {
  const auto spec = DivergenceSpec::relative_entropy(2, 0.1, 1.0);
  const auto& sim = spec.similarity();
  RandomStream rng(89);
  const auto sample = [&]() { return 0.1 + 0.9 * rng.uniform01(); };
  for (int t = 0; t < 200; ++t) {
    const Eigen::Vector2d x(sample(), sample());
    RowMatrix centers(2, 2);
    for (Index j = 0; j < 2; ++j)
      for (Index c = 0; c < 2; ++c) centers(j, c) = sample();
    const double w0 = 0.2 + 0.6 * rng.uniform01();
    const Eigen::Vector2d w(w0, 1.0 - w0);

    const auto soft_cost_with = [&](auto&& distance) {
      double m0 = -std::numeric_limits<double>::infinity();
      Eigen::Vector2d logits;
      for (Index j = 0; j < 2; ++j) {
        logits(j) = std::log(w(j)) - distance(x, centers.row(j));
        m0 = std::max(m0, logits(j));
      }
      return -(m0 + std::log(std::exp(logits(0) - m0) + std::exp(logits(1) - m0)));
    };
    const double f_phi = soft_cost_with([&](const auto& p, const auto& q) {
      const Eigen::Vector2d qv = q;
      return bregman_closed(spec, vec_span(p), vec_span(qv));
    });
    const double f_a = soft_cost_with([&](const auto& p, const auto& q) {
      const Eigen::Vector2d qv = q;
      return sim.factor.distance(vec_span(p), vec_span(qv));
    });
    CHECK(sim.mu * f_a <= f_phi + 1e-12);
    CHECK(f_phi <= f_a + 1e-12);
  }
}

TEST_CASE("adaptive seeding") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  const auto [ps, truth] = gen_gaussian_mixture(97, 10, 2, 2, 0.5, 25.0, 1.0);
  const WeightedPointSet ws = unit_weights(ps);

  const HardModel one = seed_hard(spec, ws, 1, 5);
  CHECK(one.k() == 1);
  const SoftModel sone = seed_soft(spec, ws, 1, 5);
  CHECK(sone.weights()(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sone.centers() == one.centers);

  const HardModel again = seed_hard(spec, ws, 3, 42);
  const HardModel again2 = seed_hard(spec, ws, 3, 42);
  CHECK(again.centers == again2.centers);

  CHECK_THROWS_AS(seed_hard(spec, ws, 11, 1), std::invalid_argument);

  // With unit weights the first center is uniform over the points:
  // chi-squared over 10 bins, 1000 draws, df = 9, p = 0.01 -> 21.666.
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(10);
  for (int t = 0; t < 1000; ++t) {
    const HardModel m = seed_hard(spec, ws, 1, 10'000 + t);
    for (Index i = 0; i < 10; ++i)
      if (m.centers.row(0) == ps.points.row(i)) {
        counts(i) += 1.0;
        break;
      }
  }
  CHECK(counts.sum() == 1000.0);
  double chi2 = 0.0;
  for (Index i = 0; i < 10; ++i) chi2 += (counts(i) - 100.0) * (counts(i) - 100.0) / 100.0;
  CHECK(chi2 < 21.666);
}

TEST_CASE("converged lloyd admits no improving single-point reassignment") {
  const auto spec = DivergenceSpec::squared_euclidean(2);
  for (int t = 0; t < 5; ++t) {
    const auto [ps, truth] = gen_gaussian_mixture(700 + t, 150, 4, 2, 0.5, 100.0, 1.0);
    const WeightedPointSet ws = unit_weights(ps);
    const HardModel init = seed_hard(spec, ws, 4, 60 + t);
    const auto [model, report] = lloyd_bregman(spec, ws, init, 1e-12, 200);
    REQUIRE(report.converged);
    for (Index i = 0; i < ws.m(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < model.k(); ++j)
        best = std::min(best, bregman_closed(spec, ws.row(i), model.center(j)));
      for (Index j = 0; j < model.k(); ++j)
        CHECK(bregman_closed(spec, ws.row(i), model.center(j)) >= best - 1e-12);
    }
  }
}

TEST_CASE("model JSON round trips") {
  RowMatrix centers(2, 3);
  centers << 1, 2, 3, 4, 5, 6;
  HardModel hard{centers};
  const HardModel hback = hard_model_from_json(hard_model_to_json(hard));
  CHECK(hback.centers == hard.centers);

  const SoftModel soft = SoftModel::from_weights(Eigen::Vector2d(0.25, 0.75), centers);
  const SoftModel sback = soft_model_from_json(soft_model_to_json(soft));
  CHECK(sback.centers() == soft.centers());
  CHECK(sback.weights().isApprox(soft.weights(), 1e-15));

  CHECK_THROWS_AS(soft_model_from_json(nlohmann::json{{"k", 2}}), ParseError);
  CHECK_THROWS_AS(
      SoftModel::from_weights(Eigen::Vector2d(0.5, 0.6), centers),  // not a simplex
      std::invalid_argument);
  CHECK_THROWS_AS(SoftModel::from_weights(Eigen::Vector2d(1.0, 0.0), centers),
                  std::invalid_argument);
}
