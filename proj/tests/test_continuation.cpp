#include <doctest.h>

#include <cmath>

#include "refuge/continuation.hpp"
#include "refuge/errors.hpp"
#include "test_support.hpp"

using namespace refuge;
using refuge::testing::central_refuge;
using refuge::testing::unit_square;

namespace {

ModelParams with_lambda(double lambda, Variant variant) {
  ModelParams p;
  p.lambda = lambda;
  p.variant = variant;
  return p;
}

// Coarse grid, traced down to 0.2 mu_lambda; shared across test cases.
const Branch& cached_branch(double lambda, Variant variant) {
  static const Grid grid = unit_square(16, central_refuge());
  static std::vector<std::pair<std::pair<double, Variant>, Branch>> cache;
  for (const auto& [key, branch] : cache) {
    if (key.first == lambda && key.second == variant) return branch;
  }
  const ModelParams p = with_lambda(lambda, variant);
  cache.emplace_back(std::make_pair(lambda, variant), trace_branch(grid, p, 0.2 * bifurcation_point(p)));
  return cache.back().second;
}

const Grid& coarse_grid() {
  static const Grid grid = unit_square(16, central_refuge());
  return grid;
}

constexpr Variant kBoth[] = {Variant::NonlinearDiffusion, Variant::LinearDiffusion};

} // namespace

TEST_CASE("branch points are positive with strictly decreasing mu") {
  for (double lambda : {0.5, 1.0, 1.5}) {
    for (Variant v : kBoth) {
      const Branch& b = cached_branch(lambda, v);
      const double mu_l = bifurcation_point(b.params);
      CAPTURE(lambda);
      REQUIRE(b.points.size() >= 5);
      CHECK_FALSE(b.truncated);
      CHECK(b.points.front().mu < mu_l);
      CHECK(b.points.front().mu == doctest::Approx(mu_l * (1.0 - 1e-3)).epsilon(1e-9));
      CHECK(b.points.back().mu == doctest::Approx(0.2 * mu_l).epsilon(1e-9));
      for (std::size_t k = 0; k < b.points.size(); ++k) {
        const BranchPoint& pt = b.points[k];
        CHECK(pt.min_u > 0.0);
        CHECK(pt.avg_v > 0.0);
        CHECK(gather_exterior(coarse_grid(), pt.state.v.values).minCoeff() > 0.0);
        if (k > 0) CHECK(pt.mu < b.points[k - 1].mu);
      }
    }
  }
}

TEST_CASE("branch points solve the steady problem") {
  const Branch& b = cached_branch(1.0, Variant::NonlinearDiffusion);
  ModelParams p = b.params;
  for (std::size_t k = 0; k < b.points.size(); k += 7) {
    p.mu = b.points[k].mu;
    CHECK(residual(coarse_grid(), p, b.points[k].state).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("onset estimate and secant slope match the closed form") {
  for (double lambda : {0.5, 1.0, 1.5}) {
    for (Variant v : kBoth) {
      const Branch& b = cached_branch(lambda, v);
      CAPTURE(lambda);
      const double mu_l = bifurcation_point(b.params);
      CHECK(std::abs(detect_onset(b) - mu_l) <= 1e-2 * mu_l);
      CHECK(onset_secant_slope(b) == doctest::Approx(b.onset.slope_at_onset).epsilon(0.05));
    }
  }
}

TEST_CASE("onset estimates of the two variants coincide") {
  for (double lambda : {0.5, 1.0, 1.5}) {
    const double nl = detect_onset(cached_branch(lambda, Variant::NonlinearDiffusion));
    const double lin = detect_onset(cached_branch(lambda, Variant::LinearDiffusion));
    CHECK(std::abs(nl - lin) <= 5e-3 * lin);
  }
}

TEST_CASE("estimators reject short branches") {
  Branch b = cached_branch(1.0, Variant::LinearDiffusion);
  b.points.resize(2);
  CHECK_THROWS_AS(detect_onset(b), EstimationError);
  CHECK_THROWS_AS(onset_secant_slope(b), EstimationError);
}

TEST_CASE("interpolate_avg_v") {
  const Branch& b = cached_branch(1.0, Variant::LinearDiffusion);
  const BranchPoint& p3 = b.points[3];
  CHECK(interpolate_avg_v(b, p3.mu) == doctest::Approx(p3.avg_v).epsilon(1e-14));
  const BranchPoint& p4 = b.points[4];
  const double mid = interpolate_avg_v(b, 0.5 * (p3.mu + p4.mu));
  CHECK(mid == doctest::Approx(0.5 * (p3.avg_v + p4.avg_v)).epsilon(1e-12));
  CHECK_THROWS_AS(interpolate_avg_v(b, 0.6), EstimationError);
  CHECK_THROWS_AS(interpolate_avg_v(b, 0.01), EstimationError);
}

TEST_CASE("branch_state_at polishes an exact solution") {
  const Branch& b = cached_branch(0.5, Variant::NonlinearDiffusion);
  const double mu = 0.8 * bifurcation_point(b.params);
  const auto [state, report] = branch_state_at(coarse_grid(), b, mu);
  REQUIRE(report.converged);
  CHECK(report.classification == SolutionClass::Positive);
  ModelParams p = b.params;
  p.mu = mu;
  CHECK(residual(coarse_grid(), p, state).cwiseAbs().maxCoeff() <= 1e-10);
  const BranchPoint pt = make_branch_point(coarse_grid(), mu, state, report.iterations);
  CHECK(pt.avg_v == doctest::Approx(interpolate_avg_v(b, mu)).epsilon(1e-3));
}

TEST_CASE("compare_branches") {
  SUBCASE("self comparison has unit ratio") {
    const Branch& b = cached_branch(1.5, Variant::LinearDiffusion);
    const auto rows = compare_branches(b, b, 16);
    REQUIRE(rows.size() == 16);
    CHECK(rows.front().mu == doctest::Approx(b.points.front().mu));
    CHECK(rows.back().mu == doctest::Approx(b.points.back().mu));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      CHECK(rows[k].ratio == doctest::Approx(1.0).epsilon(1e-14));
      if (k > 0) CHECK(rows[k].mu < rows[k - 1].mu);
    }
  }
  SUBCASE("the variants nearly agree close to onset") {
    for (double lambda : {0.5, 1.0, 1.5}) {
      const auto rows = compare_branches(cached_branch(lambda, Variant::NonlinearDiffusion),
                                         cached_branch(lambda, Variant::LinearDiffusion));
      const double mu_l = bifurcation_point(with_lambda(lambda, Variant::LinearDiffusion));
      for (const ComparisonRow& row : rows) {
        if (row.mu >= 0.95 * mu_l) CHECK(std::abs(row.ratio - 1.0) < 0.05);
      }
    }
  }
  SUBCASE("disjoint ranges") {
    const Branch& a = cached_branch(0.5, Variant::LinearDiffusion);
    Branch shifted = a;
    for (BranchPoint& pt : shifted.points) pt.mu += 1.0;
    CHECK_THROWS_AS(compare_branches(a, shifted), EstimationError);
    CHECK_THROWS_AS(compare_branches(shifted, a), EstimationError);
  }
}

TEST_CASE("tracing is reproducible bit for bit") {
  const Grid g = unit_square(8, central_refuge());
  const ModelParams p = with_lambda(1.0, Variant::NonlinearDiffusion);
  const Branch a = trace_branch(g, p, 0.25);
  const Branch b = trace_branch(g, p, 0.25);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t k = 0; k < a.points.size(); ++k) {
    CHECK(a.points[k].mu == b.points[k].mu);
    CHECK(a.points[k].state.u.values == b.points[k].state.u.values);
    CHECK(a.points[k].state.v.values == b.points[k].state.v.values);
  }
}

TEST_CASE("trace_branch preconditions") {
  const Grid g = unit_square(8, central_refuge());
  const ModelParams p = with_lambda(1.0, Variant::LinearDiffusion);
  CHECK_THROWS_AS(trace_branch(g, p, 0.5), ParameterError);
  CHECK_THROWS_AS(trace_branch(g, p, -0.1), ParameterError);
  ContinuationOptions bad;
  bad.min_step = 0.0;
  CHECK_THROWS_AS(trace_branch(g, p, 0.1, bad), ParameterError);
  bad = {};
  bad.max_points = 4;
  const Branch capped = trace_branch(g, p, 0.1, bad);
  CHECK(capped.points.size() == 4);
  CHECK(capped.truncated);
  CHECK_FALSE(capped.diagnostic.empty());
}
