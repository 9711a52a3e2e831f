#include <doctest.h>

#include <cmath>
#include <random>

#include "dispatch.hpp"
#include "netmodel.hpp"
#include "powerflow.hpp"

using namespace gridkit;

namespace {

GenSpec quad_gen(double c2, double c1, double p_min, double p_max) {
  GenSpec g;
  g.p_min = p_min;
  g.p_max = p_max;
  g.cost = CostFunction::quadratic(c2, c1);
  return g;
}

}  // namespace

TEST_CASE("equal marginal cost dispatch by hand") {
  // C1 = P^2, C2 = 2 P^2, demand 3 -> P = (2, 1), price 4
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.0, 10.0),
                               quad_gen(2.0, 0.0, 0.0, 10.0)};
  DispatchSolution s = economic_dispatch(gens, 3.0);
  CHECK(s.p_gen[0] == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(s.p_gen[1] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.lambda == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(s.objective == doctest::Approx(6.0).epsilon(1e-8));
  CHECK(s.binding_gens.empty());
}

TEST_CASE("single generator serves the whole load at its marginal cost") {
  std::vector<GenSpec> gens = {quad_gen(0.5, 2.0, 0.0, 10.0)};
  DispatchSolution s = economic_dispatch(gens, 4.0);
  CHECK(s.p_gen[0] == doctest::Approx(4.0));
  CHECK(s.lambda == doctest::Approx(2.0 * 0.5 * 4.0 + 2.0).epsilon(1e-8));
}

TEST_CASE("capacity cap binds and raises the system price") {
  // cheap unit capped below its unconstrained share
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.0, 1.0),
                               quad_gen(2.0, 0.0, 0.0, 10.0)};
  DispatchSolution s = economic_dispatch(gens, 3.0);
  CHECK(s.p_gen[0] == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(s.p_gen[1] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(s.lambda == doctest::Approx(8.0).epsilon(1e-6));  // marginal of unit 2
  CHECK(s.lambda > 2.0 * 1.0 * 1.0);  // above the capped unit's marginal cost
  REQUIRE(s.binding_gens.size() == 1);
  CHECK(s.binding_gens[0] == 0);
}

TEST_CASE("price bisection agrees with the qp on random instances") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + static_cast<int>(u(rng) * 4);
    std::vector<GenSpec> gens;
    double cap = 0.0;
    for (int i = 0; i < n; ++i) {
      double pmax = 0.5 + 2.0 * u(rng);
      gens.push_back(
          quad_gen(0.1 + 2.0 * u(rng), 5.0 * u(rng), 0.25 * pmax, pmax));
      cap += pmax;
    }
    double load = 0.3 * cap + 0.6 * cap * u(rng);
    load = std::max(load, 0.25 * cap);
    DispatchSolution s = economic_dispatch(gens, load);  // internal cross-check
    CHECK(s.p_gen.sum() == doctest::Approx(load).epsilon(1e-8));
  }
}

TEST_CASE("piecewise-linear costs dispatch in merit order") {
  GenSpec g1;
  g1.p_min = 0.0;
  g1.p_max = 2.0;
  g1.cost = CostFunction::piecewise_linear({{0.0, 0.0}, {1.0, 1.0}, {2.0, 4.0}});
  GenSpec g2;
  g2.p_min = 0.0;
  g2.p_max = 2.0;
  g2.cost = CostFunction::piecewise_linear({{0.0, 0.0}, {2.0, 4.0}});
  DispatchSolution s = economic_dispatch({g1, g2}, 2.0);
  CHECK(s.p_gen[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.p_gen[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.lambda == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(s.objective == doctest::Approx(3.0).epsilon(1e-5));
}

TEST_CASE("wind forecast offsets the demand like a negative load") {
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.0, 10.0)};
  DispatchSolution with_wind = economic_dispatch(gens, 3.0, 1.2);
  DispatchSolution reduced = economic_dispatch(gens, 1.8);
  CHECK(with_wind.p_gen[0] == doctest::Approx(reduced.p_gen[0]));
  CHECK(with_wind.lambda == doctest::Approx(reduced.lambda));
}

TEST_CASE("infeasible demand is rejected") {
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.5, 1.0)};
  CHECK_THROWS_WITH_AS(economic_dispatch(gens, 3.0),
                       doctest::Contains("infeasible"), Error);
  CHECK_THROWS_WITH_AS(economic_dispatch(gens, 0.1),
                       doctest::Contains("infeasible"), Error);
}

TEST_CASE("uncongested two-bus opf prices equal the single-bus dispatch") {
  GridCase c = parse_case(R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[{"bus":1,"p_min":0,"p_max":5,"q_min":0,"q_max":0,
                   "cost":{"c2":1.0,"c1":2.0,"c0":0}}],
    "loads":[{"bus":2,"p":1.5,"q":0}]})");
  DispatchSolution opf = dc_opf(c);
  DispatchSolution ed = economic_dispatch({quad_gen(1.0, 2.0, 0.0, 5.0)}, 1.5);
  CHECK(opf.lmp[0] == doctest::Approx(opf.lmp[1]).epsilon(1e-8));
  CHECK(opf.lmp[0] == doctest::Approx(ed.lambda).epsilon(1e-6));
  CHECK(opf.p_gen[0] == doctest::Approx(1.5).epsilon(1e-7));
  CHECK(opf.binding_lines.empty());
}

TEST_CASE("a binding line limit separates the prices") {
  GridCase c = parse_case(R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":1.0,"s_max":0}],
    "generators":[{"bus":1,"p_min":0,"p_max":5,"q_min":0,"q_max":0,
                   "cost":{"c2":1.0,"c1":0.0,"c0":0}},
                  {"bus":2,"p_min":0,"p_max":5,"q_min":0,"q_max":0,
                   "cost":{"c2":4.0,"c1":1.0,"c0":0}}],
    "loads":[{"bus":2,"p":1.5,"q":0}]})");
  DispatchSolution s = dc_opf(c);
  // the cheap unit fills the 1.0 line limit, the local unit covers the rest
  CHECK(s.p_gen[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s.p_gen[1] == doctest::Approx(0.5).epsilon(1e-6));
  REQUIRE(s.binding_lines.size() == 1);
  CHECK(std::abs(s.lmp[0] - s.lmp[1]) > 0.1);
  // the receiving bus pays the local marginal cost
  CHECK(s.lmp[1] == doctest::Approx(2.0 * 4.0 * 0.5 + 1.0).epsilon(1e-5));
  CHECK(s.lmp[0] == doctest::Approx(2.0 * 1.0 * 1.0).epsilon(1e-5));
}

TEST_CASE("three-bus congested opf matches a fine grid search") {
  GridCase c = parse_case(R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":3,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0.4,"s_max":0},
                {"from":2,"to":3,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0},
                {"from":1,"to":3,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[{"bus":1,"p_min":0,"p_max":3,"q_min":0,"q_max":0,
                   "cost":{"c2":0.5,"c1":1.0,"c0":0}},
                  {"bus":3,"p_min":0,"p_max":3,"q_min":0,"q_max":0,
                   "cost":{"c2":2.0,"c1":3.0,"c0":0}}],
    "loads":[{"bus":2,"p":1.0,"q":0},{"bus":3,"p":0.5,"q":0}]})");
  DispatchSolution s = dc_opf(c);

  // grid-enumeration oracle over the first generator's output
  DcModel dc = build_dc(c);
  auto cost1 = [](double p) { return 0.5 * p * p + 1.0 * p; };
  auto cost2 = [](double p) { return 2.0 * p * p + 3.0 * p; };
  double best = kInf, best_p1 = 0.0;
  for (double p1 = 0.0; p1 <= 1.5 + 1e-12; p1 += 1e-5) {
    const double p2 = 1.5 - p1;
    if (p2 < 0.0 || p2 > 3.0) continue;
    Vec inj(3);
    inj << p1, -1.0, p2 - 0.5;
    Vec theta = solve_dc(dc, inj, 0);
    const double f12 = (theta[0] - theta[1]) / 0.1;
    if (std::abs(f12) > 0.4 + 1e-9) continue;
    const double cost = cost1(p1) + cost2(p2);
    if (cost < best) {
      best = cost;
      best_p1 = p1;
    }
  }
  CHECK(s.p_gen[0] == doctest::Approx(best_p1).epsilon(1e-4));
  CHECK(s.objective == doctest::Approx(best).epsilon(1e-6));
  CHECK_FALSE(s.binding_lines.empty());
}

TEST_CASE("angle penalty keeps the program convex and solvable") {
  GridCase c = parse_case(R"({"version":1,
    "buses":[{"id":1,"type":"slack","b_shunt":0,"v_min":0.9,"v_max":1.1},
             {"id":2,"type":"PQ","b_shunt":0,"v_min":0.9,"v_max":1.1}],
    "branches":[{"from":1,"to":2,"r":0,"x":0.1,"b_c":0,"tap":1,"shift":0,"p_max":0,"s_max":0}],
    "generators":[{"bus":1,"p_min":0,"p_max":5,"q_min":0,"q_max":0,
                   "cost":{"c2":1.0,"c1":2.0,"c0":0}},
                  {"bus":2,"p_min":0,"p_max":5,"q_min":0,"q_max":0,
                   "cost":{"c2":1.0,"c1":2.0,"c0":0}}],
    "loads":[{"bus":2,"p":1.0,"q":0}]})");
  DispatchSolution plain = dc_opf(c, 0.0);
  DispatchSolution reg = dc_opf(c, 10.0);
  // the penalty discourages transfers over the line
  const double flow_plain = (plain.theta[0] - plain.theta[1]) / 0.1;
  const double flow_reg = (reg.theta[0] - reg.theta[1]) / 0.1;
  CHECK(std::abs(flow_reg) < std::abs(flow_plain));
}

TEST_CASE("weibull quantile against a monte-carlo estimate") {
  const double shape = 2.0, scale = 1.0, eps = 0.99;
  const double q = weibull_quantile(shape, scale, 1.0 - eps);
  CHECK(q == doctest::Approx(std::sqrt(-std::log(0.99))).epsilon(1e-12));
  CHECK(q == doctest::Approx(0.100251).epsilon(1e-4));

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1000000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i)
    draws[i] = scale * std::pow(-std::log(1.0 - u(rng)), 1.0 / shape);
  std::nth_element(draws.begin(), draws.begin() + n / 100, draws.end());
  CHECK(draws[n / 100] == doctest::Approx(q).epsilon(0.02));
}

TEST_CASE("chance-constrained dispatch firms the demand by the quantile") {
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.0, 10.0)};
  WindSpec wind;
  wind.weibull = {2.0, 1.0};
  wind.epsilon = 0.99;
  DispatchSolution s = chance_ed(gens, 3.0, wind);
  const double q = weibull_quantile(2.0, 1.0, 0.01);
  CHECK(s.p_gen[0] == doctest::Approx(3.0 - q).epsilon(1e-8));

  // near-certain balance requirement approaches the no-wind dispatch
  wind.epsilon = 1.0 - 1e-12;
  DispatchSolution tight = chance_ed(gens, 3.0, wind);
  DispatchSolution nowind = economic_dispatch(gens, 3.0);
  CHECK(tight.p_gen[0] == doctest::Approx(nowind.p_gen[0]).epsilon(1e-5));

  // epsilon = 1/2 equals the forecast-based dispatch at the median
  wind.epsilon = 0.5;
  DispatchSolution median = chance_ed(gens, 3.0, wind);
  const double med = weibull_quantile(2.0, 1.0, 0.5);
  DispatchSolution forecast = economic_dispatch(gens, 3.0, med);
  CHECK(median.p_gen[0] == doctest::Approx(forecast.p_gen[0]).epsilon(1e-10));
}

TEST_CASE("degenerate point-mass wind reduces demand by the forecast") {
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.0, 10.0)};
  WindSpec wind;
  wind.forecast = 0.7;
  wind.epsilon = 0.99;
  DispatchSolution s = chance_ed(gens, 3.0, wind);
  CHECK(s.p_gen[0] == doctest::Approx(2.3).epsilon(1e-10));
}

TEST_CASE("wind can cover the whole demand with zero price") {
  std::vector<GenSpec> gens = {quad_gen(1.0, 0.0, 0.0, 10.0)};
  WindSpec wind;
  wind.forecast = 5.0;
  DispatchSolution s = chance_ed(gens, 3.0, wind);
  CHECK(s.p_gen[0] == doctest::Approx(0.0));
  CHECK(s.lambda == doctest::Approx(0.0));
}
