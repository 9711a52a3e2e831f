#include <doctest.h>

#include <random>

#include "commitment.hpp"

using namespace gridkit;

namespace {

UcUnit simple_unit(double p_min, double p_max, double c1, double startup = 0.0) {
  UcUnit u;
  u.p_min = p_min;
  u.p_max = p_max;
  u.cost = CostFunction::quadratic(0.0, c1);
  u.startup = startup;
  return u;
}

UcInstance hand_instance() {
  // one unit, two periods, demand (0, 2), output range [1, 2], C = P,
  // startup 10: stay off, then run at 2 -> cost 2 + 10 = 12
  UcInstance inst;
  inst.periods = 2;
  inst.demand.resize(2);
  inst.demand << 0.0, 2.0;
  inst.units.push_back(simple_unit(1.0, 2.0, 1.0, 10.0));
  return inst;
}

}  // namespace

TEST_CASE("hand instance costs 12 via enumeration") {
  UcSchedule s = uc_bruteforce(hand_instance());
  CHECK(s.cost == doctest::Approx(12.0).epsilon(1e-8));
  CHECK(s.on[0][0] == 0);
  CHECK(s.on[0][1] == 1);
  CHECK(s.power(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("hand instance costs 12 via lagrangian relaxation") {
  UcSchedule s = uc_lagrangian(hand_instance());
  CHECK(s.cost == doctest::Approx(12.0).epsilon(1e-6));
  CHECK(s.dual_bound <= s.cost + 1e-9);
  CHECK(s.on[0][0] == 0);
  CHECK(s.on[0][1] == 1);
}

TEST_CASE("minimum up time forbids on-off-on") {
  UcUnit u = simple_unit(0.5, 2.0, 1.0);
  u.min_up = 2;
  CHECK_FALSE(commitment_feasible(u, {1, 0, 1}));
  CHECK(commitment_feasible(u, {1, 1, 0}));
  CHECK(commitment_feasible(u, {0, 1, 1}));
  // turning on at the last period leaves no room to violate anything
  CHECK(commitment_feasible(u, {0, 0, 1}));

  UcUnit d = simple_unit(0.5, 2.0, 1.0);
  d.min_down = 2;
  d.init_on = true;
  CHECK_FALSE(commitment_feasible(d, {0, 1, 1}));  // off at 1 must last 2
  CHECK(commitment_feasible(d, {0, 0, 1}));
}

TEST_CASE("cheap unit covers constant demand and the expensive one stays off") {
  UcInstance inst;
  inst.periods = 3;
  inst.demand = Vec::Constant(3, 1.0);
  UcUnit cheap = simple_unit(0.0, 2.0, 1.0, 0.0);
  cheap.cost = CostFunction::quadratic(0.1, 1.0);
  UcUnit costly = simple_unit(0.0, 2.0, 5.0, 3.0);
  costly.cost = CostFunction::quadratic(0.1, 5.0);
  inst.units = {cheap, costly};

  UcSchedule brute = uc_bruteforce(inst);
  for (int t = 0; t < 3; ++t) CHECK(brute.on[1][t] == 0);

  UcSchedule lr = uc_lagrangian(inst);
  for (int t = 0; t < 3; ++t) CHECK(lr.on[1][t] == 0);
  CHECK(lr.cost == doctest::Approx(brute.cost).epsilon(1e-6));
  CHECK(lr.gap < 1e-6);
}

TEST_CASE("lagrangian primal lands within 1% of the enumeration oracle") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int seed = 0; seed < 20; ++seed) {
    UcInstance inst;
    inst.periods = 3;
    inst.demand.resize(3);
    for (int t = 0; t < 3; ++t) inst.demand[t] = 0.5 + 2.0 * u01(rng);
    for (int m = 0; m < 2; ++m) {
      UcUnit unit;
      unit.p_max = 1.2 + 1.5 * u01(rng);
      unit.p_min = 0.25 * unit.p_max;
      unit.cost = CostFunction::quadratic(0.2 + u01(rng), 1.0 + 2.0 * u01(rng));
      unit.startup = 0.5 * u01(rng);
      unit.min_up = 1 + (u01(rng) < 0.4);
      unit.min_down = 1;
      unit.init_on = u01(rng) < 0.5;
      unit.init_power = unit.init_on ? unit.p_min : 0.0;
      inst.units.push_back(unit);
    }
    if (inst.demand.maxCoeff() > inst.units[0].p_max + inst.units[1].p_max)
      inst.demand *= 0.8;

    UcSchedule brute, lr;
    try {
      brute = uc_bruteforce(inst);
    } catch (const Error&) {
      continue;  // capacity draw happened to be infeasible
    }
    lr = uc_lagrangian(inst);
    CHECK(lr.cost <= brute.cost * 1.01 + 1e-9);
    CHECK(lr.dual_bound <= brute.cost + 1e-9);  // weak duality, exact
    CHECK(lr.gap >= -1e-12);
  }
}

TEST_CASE("schedules satisfy ramps and minimum times exactly") {
  UcInstance inst;
  inst.periods = 3;
  inst.demand.resize(3);
  inst.demand << 1.0, 1.4, 1.0;
  UcUnit unit = simple_unit(0.5, 2.0, 1.0, 0.1);
  unit.ramp_up = 0.5;
  unit.ramp_down = 0.5;
  unit.init_on = true;
  unit.init_power = 1.0;
  inst.units = {unit};

  UcSchedule s = uc_bruteforce(inst);
  CHECK(commitment_feasible(inst.units[0], s.on[0]));
  double prev = unit.init_power;
  for (int t = 0; t < 3; ++t) {
    CHECK(s.power(0, t) - prev <= unit.ramp_up + 1e-9);
    CHECK(prev - s.power(0, t) <= unit.ramp_down + 1e-9);
    prev = s.power(0, t);
  }
  CHECK(s.power.row(0).sum() == doctest::Approx(inst.demand.sum()).epsilon(1e-8));
}

TEST_CASE("ramp limits can force a second unit online") {
  UcInstance inst;
  inst.periods = 2;
  inst.demand.resize(2);
  inst.demand << 1.0, 2.0;
  UcUnit slow = simple_unit(0.0, 3.0, 1.0);
  slow.ramp_up = 0.5;
  slow.init_on = true;
  slow.init_power = 1.0;
  UcUnit helper = simple_unit(0.0, 2.0, 4.0, 0.2);
  inst.units = {slow, helper};

  UcSchedule s = uc_bruteforce(inst);
  CHECK(s.on[1][1] == 1);  // the helper must cover the ramp shortfall
  CHECK(s.power(0, 1) == doctest::Approx(1.5));
  CHECK(s.power(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("single period with all units forced on reduces to economic dispatch") {
  UcInstance inst;
  inst.periods = 1;
  inst.demand.resize(1);
  inst.demand << 2.5;
  UcUnit a = simple_unit(0.0, 1.5, 0.0);
  a.cost = CostFunction::quadratic(1.0, 0.0);
  a.init_on = true;
  UcUnit b = simple_unit(0.0, 1.5, 0.0);
  b.cost = CostFunction::quadratic(2.0, 0.0);
  b.init_on = true;
  inst.units = {a, b};  // demand exceeds either unit alone: both must run

  UcSchedule uc = uc_bruteforce(inst);
  DispatchSolution ed = economic_dispatch(
      {{0.0, 1.5, CostFunction::quadratic(1.0, 0.0)},
       {0.0, 1.5, CostFunction::quadratic(2.0, 0.0)}},
      2.5);
  CHECK(uc.cost == doctest::Approx(ed.objective).epsilon(1e-6));
  CHECK(uc.power(0, 0) == doctest::Approx(ed.p_gen[0]).epsilon(1e-6));

  UcSchedule lr = uc_lagrangian(inst);
  CHECK(lr.cost == doctest::Approx(ed.objective).epsilon(1e-6));
}

TEST_CASE("oversized instances are rejected by the enumeration guard") {
  UcInstance inst;
  inst.periods = 9;
  inst.demand = Vec::Constant(9, 1.0);
  inst.units = {simple_unit(0.0, 2.0, 1.0), simple_unit(0.0, 2.0, 1.0)};
  CHECK_THROWS_WITH_AS(uc_bruteforce(inst), doctest::Contains("too large"), Error);
}

TEST_CASE("capacity shortfall reports the violating periods") {
  UcInstance inst;
  inst.periods = 2;
  inst.demand.resize(2);
  inst.demand << 1.0, 5.0;
  inst.units = {simple_unit(0.0, 2.0, 1.0)};
  CHECK_THROWS_WITH_AS(inst.validate(), doctest::Contains("exceeds total capacity"),
                       Error);

  // per-period shortfall inside the fixed-commitment dispatch
  UcInstance ok = hand_instance();
  std::vector<std::vector<char>> off_everywhere(1, std::vector<char>(2, 0));
  CHECK_THROWS_WITH_AS(dispatch_fixed_commitment(ok, off_everywhere),
                       doctest::Contains("periods: 1"), Error);
}
