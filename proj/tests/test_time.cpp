#include <doctest.h>

#include <cmath>

#include "refuge/continuation.hpp"
#include "refuge/errors.hpp"
#include "refuge/time_integrator.hpp"
#include "test_support.hpp"

using namespace refuge;
using refuge::testing::central_refuge;
using refuge::testing::Rng;
using refuge::testing::unit_square;

namespace {

ModelParams at(double lambda, double mu_fraction, Variant variant = Variant::NonlinearDiffusion) {
  ModelParams p;
  p.lambda = lambda;
  p.variant = variant;
  p.mu = mu_fraction * p.c * lambda / (1.0 + p.m * lambda);
  return p;
}

TimeOptions coarse(double t_max) {
  TimeOptions o;
  o.dt = 0.1;
  o.t_max = t_max;
  return o;
}

constexpr Variant kBoth[] = {Variant::NonlinearDiffusion, Variant::LinearDiffusion};

} // namespace

TEST_CASE("equilibria are fixed points of one step") {
  const Grid g = unit_square(16, central_refuge());
  for (Variant v : kBoth) {
    const ModelParams p = at(1.0, 0.8, v);
    for (double lambda : {0.0, p.lambda}) {
      const State s = semi_trivial_state(g, lambda);
      const State next = step(g, p, s, 0.1);
      CHECK((next.u.values - s.u.values).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK(next.v.values.cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("without predators the prey relaxes to lambda") {
  const Grid g = unit_square(16, central_refuge());
  for (Variant v : kBoth) {
    const ModelParams p = at(1.5, 0.5, v);
    Rng rng(8);
    State s = semi_trivial_state(g, 0.0);
    for (int c = 0; c < g.num_cells(); ++c) s.u.values[c] = rng.uniform(0.1, 2.5);
    const EvolveResult r = evolve_to_steady(g, p, s, coarse(200.0));
    CHECK(r.steady);
    CHECK((r.state.u.values.array() - p.lambda).abs().maxCoeff() < 1e-6);
    CHECK(r.state.v.values.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("above mu_lambda the predator dies out") {
  const Grid g = unit_square(16, central_refuge());
  for (Variant v : kBoth) {
    const ModelParams p = at(1.0, 1.2, v);
    const State s{ScalarField::constant(g, 0.8), ScalarField::constant(g, 0.3, Region::Exterior)};
    TimeOptions o = coarse(400.0);
    double last_total = INFINITY;
    bool decreasing = true;
    const EvolveResult r = evolve_to_steady(
        g, p, s, o,
        [&](double t, const State& st, double) {
          const double total = integrate(g, st.v, Region::Exterior);
          if (t > 20.0 && total > last_total) decreasing = false;
          last_total = total;
        },
        10);
    CHECK(decreasing);
    CHECK(gather_exterior(g, r.state.v.values).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((r.state.u.values.array() - p.lambda).abs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("property: densities stay non-negative and the refuge stays predator-free") {
  const Grid g = unit_square(16, central_refuge());
  Rng rng(44);
  for (int trial = 0; trial < 6; ++trial) {
    const ModelParams p = at(rng.uniform(0.5, 1.5), rng.uniform(0.2, 1.3), kBoth[trial % 2]);
    State s = refuge::testing::random_state(g, rng);
    TimeStepper stepper(g, p, 0.05);
    Eigen::VectorXd x = pack(g, s);
    for (int k = 0; k < 200; ++k) {
      stepper.advance(x);
      REQUIRE(x.minCoeff() >= 0.0);
    }
    const State end = unpack(g, x);
    for (int c = 0; c < g.num_cells(); ++c) {
      if (g.is_refuge(c)) CHECK(end.v.values[c] == 0.0);
    }
    const State one = step(g, p, s, 0.05);
    for (int c = 0; c < g.num_cells(); ++c) {
      if (g.is_refuge(c)) CHECK(one.v.values[c] == 0.0);
    }
  }
}

TEST_CASE("steady state of the time stepper matches the continuation branch") {
  const Grid g = unit_square(16, central_refuge());
  for (Variant v : kBoth) {
    const ModelParams p = at(1.0, 1.0, v);
    const Branch b = trace_branch(g, p, 0.7 * p.mu);
    const double mu = 0.8 * p.mu;
    const auto [target, rep] = branch_state_at(g, b, mu);
    REQUIRE(rep.converged);

    ModelParams q = p;
    q.mu = mu;
    const State start{ScalarField::constant(g, 0.8), ScalarField::constant(g, 0.1, Region::Exterior)};
    const EvolveResult r = evolve_to_steady(g, q, start, coarse(1000.0));
    REQUIRE(r.steady);
    CHECK_FALSE(r.clamp_flagged);
    CHECK((pack(g, r.state) - pack(g, target)).cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("evolve_to_steady bookkeeping") {
  const Grid g = unit_square(8, central_refuge());
  const ModelParams p = at(1.0, 0.8);
  const State s{ScalarField::constant(g, 0.5), ScalarField::constant(g, 0.1, Region::Exterior)};
  SUBCASE("t_max = 0 reports only the initial snapshot") {
    int calls = 0;
    const EvolveResult r = evolve_to_steady(g, p, s, coarse(0.0), [&](double t, const State&, double) {
      CHECK(t == 0.0);
      ++calls;
    });
    CHECK(calls == 1);
    CHECK(r.steps == 0);
    CHECK_FALSE(r.steady);
    CHECK(r.state.u.values == s.u.values);
  }
  SUBCASE("snapshots at the requested cadence") {
    std::vector<double> times;
    const EvolveResult r =
        evolve_to_steady(g, p, s, coarse(1.0), [&](double t, const State&, double) { times.push_back(t); }, 5);
    CHECK(r.steps == 10);
    CHECK(r.t == doctest::Approx(1.0));
    REQUIRE(times.size() == 3);
    CHECK(times[1] == doctest::Approx(0.5));
    CHECK(times[2] == doctest::Approx(1.0));
  }
  SUBCASE("invalid options") {
    TimeOptions o;
    o.dt = 0.0;
    CHECK_THROWS_AS(evolve_to_steady(g, p, s, o), ParameterError);
    o = {};
    o.t_max = -1.0;
    CHECK_THROWS_AS(evolve_to_steady(g, p, s, o), ParameterError);
  }
}
