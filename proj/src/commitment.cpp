#include "commitment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridkit {

void UcInstance::validate() const {
  if (periods < 1) fail_invalid("uc: need at least one period");
  if (demand.size() != periods) fail_invalid("uc: demand length mismatch");
  if (units.empty()) fail_invalid("uc: need at least one unit");
  double cap = 0.0;
  for (const UcUnit& u : units) {
    if (u.p_min > u.p_max) fail_invalid("uc: unit p_min exceeds p_max");
    if (u.min_up < 1 || u.min_down < 1)
      fail_invalid("uc: minimum up/down times must be at least one period");
    if (u.startup < 0.0) fail_invalid("uc: negative startup cost");
    cap += u.p_max;
  }
  if (demand.maxCoeff() > cap + 1e-9)
    fail_invalid("uc: demand exceeds total capacity");
}

bool commitment_feasible(const UcUnit& unit, const std::vector<char>& on) {
  const int T = static_cast<int>(on.size());
  char prev = unit.init_on ? 1 : 0;
  for (int t = 0; t < T; ++t) {
    if (on[t] > prev) {  // turned on: must stay on for min_up periods
      for (int tau = t + 1; tau < std::min(t + unit.min_up, T); ++tau)
        if (!on[tau]) return false;
    }
    if (on[t] < prev) {  // turned off: must stay off for min_down periods
      for (int tau = t + 1; tau < std::min(t + unit.min_down, T); ++tau)
        if (on[tau]) return false;
    }
    prev = on[t];
  }
  return true;
}

namespace {

// Per-unit Lagrangian subproblem solved by dynamic programming over the
// on/off status and its age (clipped at the minimum up/down times).
// forced[t]: -1 free, 0 must be off, 1 must be on.
struct UnitPath {
  double value = 0.0;
  std::vector<char> on;
  std::vector<double> power;  // continuous stage minimizer when on
};

UnitPath unit_subproblem(const UcUnit& u, const Vec& lambda,
                         const std::vector<int>& forced) {
  const int T = static_cast<int>(lambda.size());
  const int cu = u.min_up, cd = u.min_down;
  const int n_states = cu + cd;  // on ages 1..cu then off ages 1..cd
  auto on_state = [&](int k) { return k - 1; };
  auto off_state = [&](int k) { return cu + k - 1; };

  // exact continuous stage cost of running at price lambda_t
  std::vector<double> w(T), p_opt(T);
  for (int t = 0; t < T; ++t) {
    auto [lo, hi] = u.cost.argmin_net_cost(lambda[t], u.p_min, u.p_max);
    const double p = 0.5 * (lo + hi);
    p_opt[t] = p;
    w[t] = u.cost.value(p) - lambda[t] * p;
  }

  const double big = kInf;
  Mat D = Mat::Constant(T, n_states, big);
  Eigen::MatrixXi parent = Eigen::MatrixXi::Constant(T, n_states, -1);

  auto relax = [&](int t, int s, double cost, int from) {
    if (cost < D(t, s)) {
      D(t, s) = cost;
      parent(t, s) = from;
    }
  };

  // transitions out of (status, age) into period t
  auto expand = [&](int t, int s_prev, double base) {
    const bool was_on = s_prev < cu;
    const int age = was_on ? s_prev + 1 : s_prev - cu + 1;
    if (forced[t] != 0) {  // may be on at t
      if (was_on)
        relax(t, on_state(std::min(age + 1, cu)), base + w[t], s_prev);
      else if (age >= cd)
        relax(t, on_state(1), base + w[t] + u.startup, s_prev);
    }
    if (forced[t] != 1) {  // may be off at t
      if (was_on) {
        if (age >= cu) relax(t, off_state(1), base, s_prev);
      } else {
        relax(t, off_state(std::min(age + 1, cd)), base, s_prev);
      }
    }
  };

  // the initial status carries no pending obligation; only switches inside
  // the horizon create them
  const int s0 = u.init_on ? on_state(cu) : off_state(cd);
  expand(0, s0, 0.0);
  for (int t = 1; t < T; ++t)
    for (int s = 0; s < n_states; ++s)
      if (D(t - 1, s) < big) expand(t, s, D(t - 1, s));

  UnitPath path;
  path.on.assign(T, 0);
  path.power.assign(T, 0.0);
  int s_best = -1;
  double best = big;
  for (int s = 0; s < n_states; ++s) {
    if (D(T - 1, s) < best) {
      best = D(T - 1, s);
      s_best = s;
    }
  }
  if (s_best < 0) fail_numeric("uc: forced commitment pattern is infeasible");
  path.value = best;
  for (int t = T - 1, s = s_best; t >= 0; --t) {
    path.on[t] = s < cu;
    path.power[t] = path.on[t] ? p_opt[t] : 0.0;
    s = parent(t, s);
  }
  return path;
}

// Ramp-aware variant on a discretized power grid; used to propose schedules
// when ramps are finite. The reported dual bound always comes from the
// continuous relaxation above, which stays a certified lower bound.
UnitPath unit_subproblem_levels(const UcUnit& u, const Vec& lambda, int levels,
                                const std::vector<int>& forced) {
  const int T = static_cast<int>(lambda.size());
  const int cu = u.min_up, cd = u.min_down;
  const int L = u.p_max > u.p_min ? std::max(2, levels) : 1;
  std::vector<double> grid(L);
  for (int i = 0; i < L; ++i)
    grid[i] = L == 1 ? u.p_min
                     : u.p_min + (u.p_max - u.p_min) * i / (L - 1);

  const int n_on = cu * L, n_states = n_on + cd;
  auto on_state = [&](int k, int i) { return (k - 1) * L + i; };
  auto off_state = [&](int k) { return n_on + k - 1; };

  Mat stage(T, L);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < L; ++i)
      stage(t, i) = u.cost.value(grid[i]) - lambda[t] * grid[i];

  const double big = kInf;
  Mat D = Mat::Constant(T, n_states, big);
  Eigen::MatrixXi parent = Eigen::MatrixXi::Constant(T, n_states, -1);
  auto relax = [&](int t, int s, double cost, int from) {
    if (cost < D(t, s)) {
      D(t, s) = cost;
      parent(t, s) = from;
    }
  };
  auto ramp_ok = [&](double from_p, double to_p) {
    return to_p - from_p <= u.ramp_up + 1e-12 &&
           from_p - to_p <= u.ramp_down + 1e-12;
  };

  auto expand = [&](int t, int s_prev, double base, double prev_power) {
    const bool was_on = s_prev < n_on;
    const int age = was_on ? s_prev / L + 1 : s_prev - n_on + 1;
    if (forced[t] != 0) {
      if (was_on) {
        for (int i = 0; i < L; ++i)
          if (ramp_ok(prev_power, grid[i]))
            relax(t, on_state(std::min(age + 1, cu), i), base + stage(t, i),
                  s_prev);
      } else if (age >= cd) {
        for (int i = 0; i < L; ++i)
          if (ramp_ok(0.0, grid[i]))
            relax(t, on_state(1, i), base + stage(t, i) + u.startup, s_prev);
      }
    }
    if (forced[t] != 1) {
      if (was_on) {
        if (age >= cu && ramp_ok(prev_power, 0.0)) relax(t, off_state(1), base, s_prev);
      } else {
        relax(t, off_state(std::min(age + 1, cd)), base, s_prev);
      }
    }
  };

  const int s0 = u.init_on ? on_state(cu, 0) : off_state(cd);
  expand(0, s0, 0.0, u.init_on ? u.init_power : 0.0);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < n_states; ++s) {
      if (D(t - 1, s) >= big) continue;
      const double prev_power = s < n_on ? grid[s % L] : 0.0;
      expand(t, s, D(t - 1, s), prev_power);
    }
  }

  UnitPath path;
  path.on.assign(T, 0);
  path.power.assign(T, 0.0);
  int s_best = -1;
  double best = big;
  for (int s = 0; s < n_states; ++s)
    if (D(T - 1, s) < best) {
      best = D(T - 1, s);
      s_best = s;
    }
  if (s_best < 0) fail_numeric("uc: forced commitment pattern is infeasible");
  path.value = best;
  for (int t = T - 1, s = s_best; t >= 0; --t) {
    path.on[t] = s < n_on;
    path.power[t] = path.on[t] ? grid[s % L] : 0.0;
    s = parent(t, s);
  }
  return path;
}

double startup_cost(const UcInstance& inst,
                    const std::vector<std::vector<char>>& on) {
  double total = 0.0;
  for (size_t m = 0; m < inst.units.size(); ++m) {
    char prev = inst.units[m].init_on ? 1 : 0;
    for (int t = 0; t < inst.periods; ++t) {
      if (on[m][t] && !prev) total += inst.units[m].startup;
      prev = on[m][t];
    }
  }
  return total;
}

std::vector<int> capacity_violations(const UcInstance& inst,
                                     const std::vector<std::vector<char>>& on) {
  std::vector<int> bad;
  for (int t = 0; t < inst.periods; ++t) {
    double lo = 0.0, hi = 0.0;
    for (size_t m = 0; m < inst.units.size(); ++m) {
      if (!on[m][t]) continue;
      lo += inst.units[m].p_min;
      hi += inst.units[m].p_max;
    }
    if (inst.demand[t] < lo - 1e-9 || inst.demand[t] > hi + 1e-9)
      bad.push_back(t);
  }
  return bad;
}

}  // namespace

FixedCommitmentDispatch dispatch_fixed_commitment(
    const UcInstance& inst, const std::vector<std::vector<char>>& on) {
  const int T = inst.periods;
  const int ng = static_cast<int>(inst.units.size());

  std::vector<int> bad = capacity_violations(inst, on);
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "uc dispatch infeasible (capacity shortfall) at periods:";
    for (int t : bad) msg << ' ' << t;
    fail_invalid(msg.str());
  }

  // variable layout: P[m][t] at m*T+t, epigraph variables appended
  std::vector<std::vector<int>> epi(ng, std::vector<int>(T, -1));
  int nv = ng * T;
  for (int m = 0; m < ng; ++m)
    for (int t = 0; t < T; ++t)
      if (on[m][t] && !inst.units[m].cost.is_quadratic()) epi[m][t] = nv++;

  // balance rows only where someone is on; an all-off period needs zero load
  std::vector<int> balance_periods;
  for (int t = 0; t < T; ++t) {
    bool any = false;
    for (int m = 0; m < ng; ++m) any = any || on[m][t];
    if (any) balance_periods.push_back(t);
  }

  QpProblem qp = QpProblem::sized(nv, static_cast<int>(balance_periods.size()), 0);
  Vec lo = Vec::Zero(nv), hi = Vec::Zero(nv);
  for (int m = 0; m < ng; ++m) {
    const UcUnit& u = inst.units[m];
    for (int t = 0; t < T; ++t) {
      const int v = m * T + t;
      if (on[m][t]) {
        lo[v] = u.p_min;
        hi[v] = u.p_max;
        if (u.cost.is_quadratic()) {
          qp.Q(v, v) = 2.0 * u.cost.quad().c2;
          qp.c[v] = u.cost.quad().c1;
          qp.c0 += u.cost.quad().c0;
        } else {
          qp.c[epi[m][t]] = 1.0;
          hi[epi[m][t]] = kInf;
          lo[epi[m][t]] = -kInf;
        }
      }
    }
  }
  for (size_t r = 0; r < balance_periods.size(); ++r) {
    const int t = balance_periods[r];
    for (int m = 0; m < ng; ++m)
      if (on[m][t]) qp.A_eq(r, m * T + t) = 1.0;
    qp.b_eq[r] = inst.demand[t];
  }
  qp.add_box(lo, hi);
  for (int m = 0; m < ng; ++m) {
    const UcUnit& u = inst.units[m];
    for (int t = 0; t < T; ++t) {
      if (epi[m][t] >= 0) {
        for (auto [slope, intercept] : u.cost.epigraph_segments()) {
          Vec row = Vec::Zero(nv);
          row[m * T + t] = slope;
          row[epi[m][t]] = -1.0;
          qp.add_ineq(row, -intercept);
        }
      }
      // ramping, with P^0 from the initial condition
      const double prev_fixed = t == 0 ? (u.init_on ? u.init_power : 0.0) : 0.0;
      if (std::isfinite(u.ramp_up)) {
        Vec row = Vec::Zero(nv);
        row[m * T + t] = 1.0;
        double rhs = u.ramp_up;
        if (t == 0)
          rhs += prev_fixed;
        else
          row[m * T + t - 1] = -1.0;
        qp.add_ineq(row, rhs);
      }
      if (std::isfinite(u.ramp_down)) {
        Vec row = Vec::Zero(nv);
        row[m * T + t] = -1.0;
        double rhs = u.ramp_down;
        if (t == 0)
          rhs -= prev_fixed;
        else
          row[m * T + t - 1] = 1.0;
        qp.add_ineq(row, rhs);
      }
    }
  }

  QpSolution sol = solve_qp(qp);
  if (sol.status != QpStatus::Optimal)
    fail_invalid("uc dispatch infeasible under ramp constraints");

  FixedCommitmentDispatch out;
  out.power = Mat::Zero(ng, T);
  out.cost = 0.0;
  for (int m = 0; m < ng; ++m) {
    for (int t = 0; t < T; ++t) {
      if (!on[m][t]) continue;
      out.power(m, t) = sol.x[m * T + t];
      out.cost += inst.units[m].cost.value(out.power(m, t));
    }
  }
  return out;
}

UcSchedule uc_lagrangian(const UcInstance& inst, const UcOptions& opt) {
  inst.validate();
  const int T = inst.periods;
  const int ng = static_cast<int>(inst.units.size());
  const std::vector<int> free_pattern(T, -1);

  bool has_ramps = false;
  for (const UcUnit& u : inst.units)
    has_ramps = has_ramps || std::isfinite(u.ramp_up) || std::isfinite(u.ramp_down);

  // warm-start prices from an all-on single-period dispatch
  Vec lambda0(T);
  {
    std::vector<GenSpec> gens;
    double cap_lo = 0.0;
    for (const UcUnit& u : inst.units) {
      gens.push_back({u.p_min, u.p_max, u.cost});
      cap_lo += u.p_min;
    }
    for (int t = 0; t < T; ++t) {
      if (inst.demand[t] <= cap_lo + 1e-12) {
        lambda0[t] = 0.0;
        continue;
      }
      lambda0[t] = economic_dispatch(gens, inst.demand[t]).lambda;
    }
  }

  // dual function: exact continuous per-unit subproblems (no ramps), a
  // certified lower bound on the mixed-integer optimum
  ConcaveOracle oracle = [&](const Vec& lambda) {
    double value = lambda.dot(inst.demand);
    Vec served = Vec::Zero(T);
    for (int m = 0; m < ng; ++m) {
      UnitPath path = unit_subproblem(inst.units[m], lambda, free_pattern);
      value += path.value;
      for (int t = 0; t < T; ++t) served[t] += path.power[t];
    }
    Vec grad = inst.demand - served;
    return std::make_pair(value, grad);
  };
  SubgradientResult dual = subgradient_max(oracle, lambda0, opt.subgradient);

  // commitment proposal at the best prices
  std::vector<std::vector<char>> on(ng, std::vector<char>(T, 0));
  for (int m = 0; m < ng; ++m) {
    UnitPath path =
        has_ramps
            ? unit_subproblem_levels(inst.units[m], dual.lambda_best,
                                     opt.power_grid_levels, free_pattern)
            : unit_subproblem(inst.units[m], dual.lambda_best, free_pattern);
    for (int t = 0; t < T; ++t) on[m][t] = path.on[t];
  }

  // greedy repair: force extra commitment into shortfall periods (or force
  // units out of overcommitted ones), re-solving the unit DP with the
  // period pinned so minimum up/down times stay honored
  for (int round = 0; round < 4 * T * ng; ++round) {
    std::vector<int> bad = capacity_violations(inst, on);
    if (bad.empty()) break;
    const int t = bad.front();
    double lo = 0.0, hi = 0.0;
    for (int m = 0; m < ng; ++m) {
      if (!on[m][t]) continue;
      lo += inst.units[m].p_min;
      hi += inst.units[m].p_max;
    }
    int pick = -1;
    if (inst.demand[t] > hi) {  // shortfall: cheapest offline unit at max
      double best_rate = kInf;
      for (int m = 0; m < ng; ++m) {
        if (on[m][t]) continue;
        const double rate = inst.units[m].cost.value(inst.units[m].p_max) /
                            std::max(inst.units[m].p_max, 1e-9);
        if (rate < best_rate) {
          best_rate = rate;
          pick = m;
        }
      }
      if (pick < 0) break;
      std::vector<int> forced(T, -1);
      for (int tt = 0; tt < T; ++tt) forced[tt] = on[pick][tt] ? 1 : -1;
      forced[t] = 1;
      UnitPath path = unit_subproblem(inst.units[pick], dual.lambda_best, forced);
      for (int tt = 0; tt < T; ++tt) on[pick][tt] = path.on[tt];
    } else {  // overcommitted minimums: drop the most expensive online unit
      double worst_rate = -kInf;
      for (int m = 0; m < ng; ++m) {
        if (!on[m][t]) continue;
        const double rate = inst.units[m].cost.value(inst.units[m].p_min) /
                            std::max(inst.units[m].p_min, 1e-9);
        if (rate > worst_rate) {
          worst_rate = rate;
          pick = m;
        }
      }
      if (pick < 0) break;
      std::vector<int> forced(T, -1);
      forced[t] = 0;
      UnitPath path = unit_subproblem(inst.units[pick], dual.lambda_best, forced);
      for (int tt = 0; tt < T; ++tt) on[pick][tt] = path.on[tt];
    }
  }
  {
    std::vector<int> bad = capacity_violations(inst, on);
    if (!bad.empty()) {
      std::ostringstream msg;
      msg << "uc primal recovery infeasible (capacity shortfall) at periods:";
      for (int t : bad) msg << ' ' << t;
      fail_invalid(msg.str());
    }
  }

  FixedCommitmentDispatch ed = dispatch_fixed_commitment(inst, on);
  UcSchedule sched;
  sched.on = on;
  sched.power = ed.power;
  sched.cost = ed.cost + startup_cost(inst, on);
  sched.dual_bound = dual.value_best;
  sched.gap = (sched.cost - sched.dual_bound) / std::max(1.0, std::abs(sched.cost));
  return sched;
}

UcSchedule uc_bruteforce(const UcInstance& inst) {
  inst.validate();
  const int T = inst.periods;
  const int ng = static_cast<int>(inst.units.size());
  if (ng * T > 16) fail_invalid("uc: instance too large for enumeration");

  UcSchedule best;
  best.cost = kInf;
  const int bits = ng * T;
  for (long mask = 0; mask < (1L << bits); ++mask) {
    std::vector<std::vector<char>> on(ng, std::vector<char>(T, 0));
    for (int m = 0; m < ng; ++m)
      for (int t = 0; t < T; ++t) on[m][t] = (mask >> (m * T + t)) & 1;

    bool ok = true;
    for (int m = 0; m < ng && ok; ++m)
      ok = commitment_feasible(inst.units[m], on[m]);
    if (!ok || !capacity_violations(inst, on).empty()) continue;

    FixedCommitmentDispatch ed;
    try {
      ed = dispatch_fixed_commitment(inst, on);
    } catch (const Error&) {
      continue;  // ramp-infeasible pattern
    }
    const double total = ed.cost + startup_cost(inst, on);
    if (total < best.cost) {
      best.on = on;
      best.power = ed.power;
      best.cost = total;
    }
  }
  if (best.cost == kInf) fail_invalid("uc: no feasible commitment exists");
  best.dual_bound = best.cost;
  best.gap = 0.0;
  return best;
}

}  // namespace gridkit
