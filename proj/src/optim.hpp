#pragma once

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "common.hpp"
#include "linalg.hpp"

namespace gridkit {

/// Convex quadratic program
///   min 1/2 x'Qx + c'x + c0
///   s.t. A_eq x = b_eq,  A_in x <= b_in
/// Variable bounds are encoded as inequality rows (see add_box).
struct QpProblem {
  Mat Q;
  Vec c;
  double c0 = 0.0;
  Mat A_eq;  // may have zero rows
  Vec b_eq;
  Mat A_in;  // may have zero rows
  Vec b_in;

  int n() const { return static_cast<int>(Q.rows()); }
  static QpProblem sized(int n, int me, int mi);
  /// Appends x <= hi and -x <= -lo rows, skipping infinite bounds.
  void add_box(const Vec& lo, const Vec& hi);
  void add_ineq(const Vec& row, double rhs);
  void validate() const;
};

enum class QpStatus { Optimal, Infeasible, MaxIter };

struct QpSolution {
  Vec x;
  /// Equality duals in the price convention: d(objective)/d(b_eq).
  Vec eq_duals;
  /// Nonnegative inequality multipliers, complementary with b_in - A_in x.
  Vec in_duals;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  QpStatus status = QpStatus::MaxIter;
};

struct QpOptions {
  double tol = 1e-9;
  int max_iter = 100;
};

/// Primal-dual interior point with Mehrotra predictor-corrector steps.
QpSolution solve_qp(const QpProblem& p, const QpOptions& opt = {});

/// Root of a sign-changing scalar function, bracketed to interval width tol.
double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tol = 1e-12);

/// Oracle for a concave function: value and a supergradient at lambda.
using ConcaveOracle = std::function<std::pair<double, Vec>(const Vec&)>;

struct SubgradientOptions {
  double step_a = 1.0;  // step_k = a / (b + k)
  double step_b = 10.0;
  int iterations = 500;
};

struct SubgradientResult {
  Vec lambda_best;
  double value_best = -kInf;
  std::vector<double> trace;  // best value so far, one entry per iteration
};

/// Projected-free subgradient ascent with best-iterate tracking.
SubgradientResult subgradient_max(const ConcaveOracle& oracle, const Vec& lambda0,
                                  const SubgradientOptions& opt = {});

}  // namespace gridkit
