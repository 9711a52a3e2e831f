#pragma once

#include <vector>

#include "optim.hpp"

namespace gridkit {

/// Smart appliance: separable quadratic-concave utility
/// U(p) = sum_t u1_t p_t - 0.5 u2_t p_t^2 over per-slot bounds, with an
/// optional total-energy requirement.
struct Appliance {
  Vec u1;
  Vec u2;  // nonnegative curvature
  Vec p_min, p_max;
  enum class Energy { None, Equal, AtMost } energy_kind = Energy::None;
  double energy = 0.0;
};

struct DrUser {
  std::vector<Appliance> appliances;
};

/// Multi-user demand-response instance: the LSE procures s^t at quadratic
/// cost, users schedule appliances, supply is bounded per period.
struct DrInstance {
  int periods = 0;
  Vec lse_c2, lse_c1;  // per-period supply cost coefficients
  double s_min = 0.0, s_max = kInf;
  std::vector<DrUser> users;
  void validate() const;
};

enum class DrMode { Central, Dual };

struct DrOptions {
  int iterations = 600;
  double step_a = 2.0, step_b = 5.0;  // diminishing price steps a/(b+k)
  double price_tol = 1e-6;            // stop when the price moves less
};

struct DrResult {
  std::vector<std::vector<Vec>> schedules;  // [user][appliance], length T
  Vec supply;
  Vec prices;  // per-period balance prices
  double objective = 0.0;  // supply cost minus total utility (minimized)
  double welfare = 0.0;    // negative objective
  double gap = 0.0;        // primal-dual gap estimate (dual mode)
  int iterations = 0;
  bool converged = true;
};

/// Welfare scheduling. Central mode solves one quadratic program (the
/// oracle); dual mode relaxes the balance, lets every appliance solve its
/// own subproblem against posted prices and updates them by subgradient.
DrResult dr_solve(const DrInstance& inst, DrMode mode, const DrOptions& opt = {});

/// Load curtailment: single period, supply pinned to the deficit, zero LSE
/// cost; returns the discomfort-minimizing allocation and balancing price.
DrResult curtail_solve(const std::vector<DrUser>& users, double deficit);

struct PevFleet {
  Vec base_demand;  // length T
  struct Vehicle {
    Vec r_min, r_max;
    double energy = 0.0;  // required total charge
  };
  std::vector<Vehicle> vehicles;
  void validate() const;
};

struct ChargingProfiles {
  Mat rates;      // vehicles x T
  Vec aggregate;  // D(t) + sum_n r_n(t)
  Mat price_trace;      // one row per iteration (distributed mode)
  Vec objective_trace;  // sum_t aggregate^2 per iteration
  int iterations = 0;
  bool converged = true;
};

/// Valley-filling: minimize the squared aggregate load subject to rate
/// bounds and per-vehicle energy requirements (one quadratic program).
ChargingProfiles pev_central(const PevFleet& fleet);

/// Distributed valley-filling: vehicles answer price signals with proximal
/// updates, the aggregator re-posts the implied load as the next price.
ChargingProfiles pev_distributed(const PevFleet& fleet, int max_iters = 500,
                                 double tol = 1e-6);

}  // namespace gridkit
