#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "netmodel.hpp"
#include "optim.hpp"

namespace gridkit {

/// Strictly increasing convex generation cost: smooth quadratic or convex
/// piecewise-linear breakpoints.
class CostFunction {
 public:
  static CostFunction quadratic(double c2, double c1, double c0 = 0.0);
  static CostFunction quadratic(const QuadCost& q);
  /// Breakpoints (P_j, C_j) with ascending P and nondecreasing slopes.
  static CostFunction piecewise_linear(std::vector<std::pair<double, double>> pts);

  double value(double p) const;
  /// Minimizers of C(p) - lambda p over [lo, hi]; an interval when the price
  /// sits exactly on a linear segment's slope.
  std::pair<double, double> argmin_net_cost(double lambda, double lo,
                                            double hi) const;
  double marginal_below(double p) const;  // left derivative
  double marginal_above(double p) const;  // right derivative

  bool is_quadratic() const { return quad_; }
  const QuadCost& quad() const { return q_; }
  /// Supporting lines (slope, intercept) for the epigraph formulation.
  std::vector<std::pair<double, double>> epigraph_segments() const;

 private:
  bool quad_ = true;
  QuadCost q_;
  std::vector<std::pair<double, double>> pts_;
};

struct GenSpec {
  double p_min = 0.0;
  double p_max = 0.0;
  CostFunction cost = CostFunction::quadratic(0.0, 1.0);
};

struct WindSpec {
  std::optional<double> forecast;  // point forecast, p.u.
  std::optional<std::pair<double, double>> weibull;  // shape, scale
  double epsilon = 0.99;  // balance reliability level
};

struct DispatchSolution {
  Vec p_gen;
  double lambda = 0.0;  // system marginal price (single-bus dispatch)
  Vec lmp;              // per-bus prices (network dispatch)
  Vec theta;            // bus angles (network dispatch)
  double objective = 0.0;
  std::vector<int> binding_gens;
  std::vector<int> binding_lines;
};

/// Single-bus dispatch. Solved through two independent routes, the
/// balance-gap price bisection and the quadratic program, which must agree;
/// a point wind forecast offsets the demand like a negative load.
DispatchSolution economic_dispatch(const std::vector<GenSpec>& gens, double load,
                                   std::optional<double> wind_forecast = {});

/// DC optimal power flow on the case's generators, loads and line limits.
/// Per-bus balance duals are the locational marginal prices. The optional
/// penalty adds weight * sum of squared angle differences to the cost.
DispatchSolution dc_opf(const GridCase& c, double angle_penalty_weight = 0.0);

/// Chance-constrained dispatch: the balance holds with probability epsilon,
/// turned into a deterministic equivalent through the wind quantile at
/// 1 - epsilon; excess wind is curtailed (inequality balance).
DispatchSolution chance_ed(const std::vector<GenSpec>& gens, double load,
                           const WindSpec& wind);

/// Weibull inverse CDF.
double weibull_quantile(double shape, double scale, double u);

}  // namespace gridkit
