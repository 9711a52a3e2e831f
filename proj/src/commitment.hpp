#pragma once

#include <vector>

#include "dispatch.hpp"
#include "optim.hpp"

namespace gridkit {

struct UcUnit {
  double p_min = 0.0, p_max = 0.0;
  CostFunction cost = CostFunction::quadratic(0.0, 1.0);
  double startup = 0.0;  // constant cost per off->on transition
  double ramp_up = kInf, ramp_down = kInf;
  int min_up = 1, min_down = 1;
  bool init_on = false;
  double init_power = 0.0;
};

/// Single-bus unit commitment instance over T periods: the network balance
/// collapses to total generation = total demand per period.
struct UcInstance {
  int periods = 0;
  Vec demand;
  std::vector<UcUnit> units;
  void validate() const;
};

struct UcSchedule {
  std::vector<std::vector<char>> on;  // [unit][period]
  Mat power;                          // units x periods
  double cost = 0.0;                  // primal cost incl. startup
  double dual_bound = -kInf;          // certified lower bound
  double gap = 0.0;                   // (cost - dual_bound)/max(1,|cost|)
};

struct UcOptions {
  SubgradientOptions subgradient{1.0, 10.0, 500};
  int power_grid_levels = 21;  // DP discretization when ramps are finite
};

/// Checks the minimum up/down constraints of a commitment pattern against
/// the initial status (switches at t=1 count).
bool commitment_feasible(const UcUnit& unit, const std::vector<char>& on);

/// Multi-period dispatch with ramps for a fixed commitment. Throws with the
/// violating periods on a capacity shortfall.
struct FixedCommitmentDispatch {
  Mat power;
  double cost = 0.0;  // generation cost only
};
FixedCommitmentDispatch dispatch_fixed_commitment(
    const UcInstance& inst, const std::vector<std::vector<char>>& on);

/// Lagrangian relaxation of the balance constraints: subgradient ascent on
/// the period prices, per-unit dynamic programs for the subproblems, greedy
/// repair plus ramp-constrained dispatch for the primal schedule.
UcSchedule uc_lagrangian(const UcInstance& inst, const UcOptions& opt = {});

/// Exact enumeration oracle for small instances (N_g * T <= 16).
UcSchedule uc_bruteforce(const UcInstance& inst);

}  // namespace gridkit
