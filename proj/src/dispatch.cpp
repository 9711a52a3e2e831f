#include "dispatch.hpp"

#include <algorithm>
#include <cmath>

namespace gridkit {

CostFunction CostFunction::quadratic(double c2, double c1, double c0) {
  if (c2 < 0.0) fail_invalid("cost: c2 must be nonnegative");
  CostFunction f;
  f.quad_ = true;
  f.q_ = {c2, c1, c0};
  return f;
}

CostFunction CostFunction::quadratic(const QuadCost& q) {
  return quadratic(q.c2, q.c1, q.c0);
}

CostFunction CostFunction::piecewise_linear(
    std::vector<std::pair<double, double>> pts) {
  if (pts.size() < 2) fail_invalid("cost: need at least two breakpoints");
  double prev_slope = -kInf;
  for (size_t i = 1; i < pts.size(); ++i) {
    if (!(pts[i].first > pts[i - 1].first))
      fail_invalid("cost: breakpoints must have ascending abscissae");
    double slope =
        (pts[i].second - pts[i - 1].second) / (pts[i].first - pts[i - 1].first);
    if (slope < prev_slope - 1e-12)
      fail_invalid("cost: slopes must be nondecreasing (convexity)");
    prev_slope = slope;
  }
  CostFunction f;
  f.quad_ = false;
  f.pts_ = std::move(pts);
  return f;
}

double CostFunction::value(double p) const {
  if (quad_) return q_.c2 * p * p + q_.c1 * p + q_.c0;
  // linear extension beyond the end breakpoints
  size_t seg = 0;
  while (seg + 2 < pts_.size() && p > pts_[seg + 1].first) ++seg;
  const auto& [pa, ca] = pts_[seg];
  const auto& [pb, cb] = pts_[seg + 1];
  const double slope = (cb - ca) / (pb - pa);
  return ca + slope * (p - pa);
}

double CostFunction::marginal_below(double p) const {
  if (quad_) return 2.0 * q_.c2 * p + q_.c1;
  for (size_t i = pts_.size() - 1; i >= 1; --i) {
    if (p > pts_[i - 1].first + 1e-15 || i == 1)
      return (pts_[i].second - pts_[i - 1].second) /
             (pts_[i].first - pts_[i - 1].first);
  }
  return 0.0;
}

double CostFunction::marginal_above(double p) const {
  if (quad_) return 2.0 * q_.c2 * p + q_.c1;
  for (size_t i = 0; i + 1 < pts_.size(); ++i) {
    if (p < pts_[i + 1].first - 1e-15 || i + 2 == pts_.size())
      return (pts_[i + 1].second - pts_[i].second) /
             (pts_[i + 1].first - pts_[i].first);
  }
  return 0.0;
}

std::pair<double, double> CostFunction::argmin_net_cost(double lambda, double lo,
                                                        double hi) const {
  auto clip = [&](double p) { return std::clamp(p, lo, hi); };
  if (quad_) {
    if (q_.c2 > 0.0) {
      double p = clip((lambda - q_.c1) / (2.0 * q_.c2));
      return {p, p};
    }
    if (lambda < q_.c1) return {lo, lo};
    if (lambda > q_.c1) return {hi, hi};
    return {lo, hi};
  }
  // walk the segments of the piecewise-linear cost
  double p_lo = lo, p_hi = lo;
  bool below_all = true;
  for (size_t i = 0; i + 1 < pts_.size(); ++i) {
    const double slope =
        (pts_[i + 1].second - pts_[i].second) / (pts_[i + 1].first - pts_[i].first);
    if (lambda > slope + 1e-15) {
      p_lo = p_hi = clip(pts_[i + 1].first);  // still profitable past segment
      below_all = false;
    } else if (std::abs(lambda - slope) <= 1e-15) {
      p_lo = clip(pts_[i].first);
      p_hi = clip(pts_[i + 1].first);
      below_all = false;
      break;
    } else {
      if (below_all) p_lo = p_hi = clip(pts_[i].first);
      break;
    }
  }
  return {std::min(p_lo, p_hi), std::max(p_lo, p_hi)};
}

std::vector<std::pair<double, double>> CostFunction::epigraph_segments() const {
  std::vector<std::pair<double, double>> segs;
  if (quad_) fail_invalid("epigraph segments only apply to piecewise costs");
  for (size_t i = 0; i + 1 < pts_.size(); ++i) {
    const double slope =
        (pts_[i + 1].second - pts_[i].second) / (pts_[i + 1].first - pts_[i].first);
    const double intercept = pts_[i].second - slope * pts_[i].first;
    segs.emplace_back(slope, intercept);
  }
  return segs;
}

namespace {

struct LambdaRoute {
  double lambda = 0.0;
  Vec p;
};

// balance-gap bisection on the per-generator net-cost minimizers
LambdaRoute dispatch_by_price(const std::vector<GenSpec>& gens, double demand) {
  const int n = static_cast<int>(gens.size());
  double lam_lo = kInf, lam_hi = -kInf;
  for (const GenSpec& g : gens) {
    lam_lo = std::min(lam_lo, g.cost.marginal_above(g.p_min));
    lam_hi = std::max(lam_hi, g.cost.marginal_below(g.p_max));
  }
  lam_lo -= 1.0;
  lam_hi += 1.0;

  auto total = [&](double lam) {
    double lo = 0.0, hi = 0.0;
    for (const GenSpec& g : gens) {
      auto [a, b] = g.cost.argmin_net_cost(lam, g.p_min, g.p_max);
      lo += a;
      hi += b;
    }
    return std::make_pair(lo, hi);
  };

  double lambda = bisect(
      [&](double lam) {
        auto [lo, hi] = total(lam);
        return 0.5 * (lo + hi) - demand;
      },
      lam_lo, lam_hi, 1e-12);

  // Newton polish through the interior quadratic units
  for (int it = 0; it < 5; ++it) {
    auto [lo, hi] = total(lambda);
    const double gap = 0.5 * (lo + hi) - demand;
    double slope = 0.0;
    for (const GenSpec& g : gens) {
      if (!g.cost.is_quadratic() || g.cost.quad().c2 <= 0.0) continue;
      auto [a, b] = g.cost.argmin_net_cost(lambda, g.p_min, g.p_max);
      if (a > g.p_min + 1e-12 && b < g.p_max - 1e-12)
        slope += 1.0 / (2.0 * g.cost.quad().c2);
    }
    if (slope <= 0.0 || std::abs(gap) < 1e-14) break;
    lambda -= gap / slope;
  }

  // allocate: fixed parts first, remaining demand across the marginal range
  LambdaRoute out;
  out.lambda = lambda;
  out.p.resize(n);
  double assigned = 0.0;
  std::vector<std::pair<double, double>> ranges(n);
  for (int i = 0; i < n; ++i) {
    ranges[i] = gens[i].cost.argmin_net_cost(lambda, gens[i].p_min, gens[i].p_max);
    out.p[i] = ranges[i].first;
    assigned += ranges[i].first;
  }
  double deficit = demand - assigned;
  for (int i = 0; i < n && deficit > 1e-15; ++i) {
    const double room = ranges[i].second - ranges[i].first;
    const double add = std::min(room, deficit);
    out.p[i] += add;
    deficit -= add;
  }
  if (std::abs(deficit) > 1e-7 * std::max(1.0, std::abs(demand)))
    fail_numeric("price-based dispatch failed to close the balance gap");
  return out;
}

// quadratic-program route; piecewise-linear costs enter through epigraph
// variables
QpSolution dispatch_by_qp(const std::vector<GenSpec>& gens, double demand) {
  const int n = static_cast<int>(gens.size());
  std::vector<int> epi;  // epigraph variable index per pwl generator, else -1
  int extra = 0;
  for (const GenSpec& g : gens) {
    epi.push_back(g.cost.is_quadratic() ? -1 : n + extra++);
  }
  const int nv = n + extra;

  QpProblem p = QpProblem::sized(nv, 1, 0);
  for (int i = 0; i < n; ++i) {
    if (gens[i].cost.is_quadratic()) {
      const QuadCost& q = gens[i].cost.quad();
      p.Q(i, i) = 2.0 * q.c2;
      p.c[i] = q.c1;
      p.c0 += q.c0;
    } else {
      p.c[epi[i]] = 1.0;
    }
    p.A_eq(0, i) = 1.0;
  }
  p.b_eq[0] = demand;

  Vec lo = Vec::Constant(nv, -kInf), hi = Vec::Constant(nv, kInf);
  for (int i = 0; i < n; ++i) {
    lo[i] = gens[i].p_min;
    hi[i] = gens[i].p_max;
  }
  p.add_box(lo, hi);
  for (int i = 0; i < n; ++i) {
    if (epi[i] < 0) continue;
    for (auto [slope, intercept] : gens[i].cost.epigraph_segments()) {
      Vec row = Vec::Zero(nv);
      row[i] = slope;
      row[epi[i]] = -1.0;
      p.add_ineq(row, -intercept);  // slope*P - t <= -intercept
    }
  }
  QpSolution s = solve_qp(p);
  if (s.status != QpStatus::Optimal)
    fail_numeric("dispatch quadratic program did not reach optimality");
  return s;
}

}  // namespace

DispatchSolution economic_dispatch(const std::vector<GenSpec>& gens, double load,
                                   std::optional<double> wind_forecast) {
  if (gens.empty()) fail_invalid("dispatch needs at least one generator");
  const double demand = load - wind_forecast.value_or(0.0);
  double cap_lo = 0.0, cap_hi = 0.0;
  for (const GenSpec& g : gens) {
    if (g.p_min > g.p_max) fail_invalid("generator p_min exceeds p_max");
    cap_lo += g.p_min;
    cap_hi += g.p_max;
  }
  if (demand < cap_lo - 1e-9 || demand > cap_hi + 1e-9)
    fail_invalid("infeasible demand range");

  LambdaRoute price = dispatch_by_price(gens, demand);
  QpSolution qp = dispatch_by_qp(gens, demand);

  const int n = static_cast<int>(gens.size());
  Vec p_qp = qp.x.head(n);
  if (std::abs(price.lambda - qp.eq_duals[0]) > 1e-6 ||
      std::abs(price.p.sum() - p_qp.sum()) > 1e-6)
    fail_numeric("price and qp dispatch routes disagree");
  bool strictly_convex = true;
  for (const GenSpec& g : gens)
    strictly_convex = strictly_convex && g.cost.is_quadratic() &&
                      g.cost.quad().c2 > 0.0;
  if (strictly_convex && (price.p - p_qp).cwiseAbs().maxCoeff() > 1e-6)
    fail_numeric("price and qp dispatch routes disagree on the allocation");

  DispatchSolution sol;
  sol.p_gen = p_qp;
  sol.lambda = price.lambda;
  double obj = 0.0;
  for (int i = 0; i < n; ++i) obj += gens[i].cost.value(sol.p_gen[i]);
  sol.objective = obj;
  for (int i = 0; i < n; ++i) {
    if (sol.p_gen[i] < gens[i].p_min + 1e-7 || sol.p_gen[i] > gens[i].p_max - 1e-7)
      sol.binding_gens.push_back(i);
  }
  return sol;
}

DispatchSolution dc_opf(const GridCase& c, double angle_penalty_weight) {
  if (c.generators().empty()) fail_invalid("dc opf needs generators in the case");
  if (angle_penalty_weight < 0.0) fail_invalid("angle penalty must be nonnegative");
  const int n = c.n_buses();
  const int ng = static_cast<int>(c.generators().size());
  const int nl = c.n_branches();
  DcModel dc = build_dc(c);
  Vec pl = c.load_p();

  double cap_lo = 0.0, cap_hi = 0.0;
  for (const Generator& g : c.generators()) {
    cap_lo += g.p_min;
    cap_hi += g.p_max;
  }
  const double total_load = pl.sum();
  if (total_load < cap_lo - 1e-9 || total_load > cap_hi + 1e-9)
    fail_invalid("infeasible: load outside generation capacity");

  std::vector<int> limited;
  for (int l = 0; l < nl; ++l)
    if (c.branches()[l].p_max > 0.0) limited.push_back(l);

  const int ref = c.slack_index();
  auto balance_rows = [&](QpProblem& p, int nv) {
    // bus balance: sum of local generation - Bx theta = load
    for (int m = 0; m < n; ++m) {
      for (int g = 0; g < ng; ++g)
        if (c.bus_index(c.generators()[g].bus) == m) p.A_eq(m, g) = 1.0;
      for (int j = 0; j < n; ++j) p.A_eq(m, ng + j) = -dc.Bx(m, j);
      p.b_eq[m] = pl[m];
    }
    p.A_eq(n, ng + ref) = 1.0;  // theta_ref = 0
    p.b_eq[n] = 0.0;
    (void)nv;
  };
  auto flow_row = [&](int l, int nv) {
    Vec row = Vec::Zero(nv);
    row[ng + c.from_index(l)] = 1.0 / c.branches()[l].x;
    row[ng + c.to_index(l)] = -1.0 / c.branches()[l].x;
    return row;
  };

  // phase-1 feasibility: slack on every flow limit
  if (!limited.empty()) {
    const int nv = ng + n + static_cast<int>(limited.size());
    QpProblem ph = QpProblem::sized(nv, n + 1, 0);
    balance_rows(ph, nv);
    for (size_t k = 0; k < limited.size(); ++k) ph.c[ng + n + k] = 1.0;
    Vec lo = Vec::Constant(nv, -kInf), hi = Vec::Constant(nv, kInf);
    for (int g = 0; g < ng; ++g) {
      lo[g] = c.generators()[g].p_min;
      hi[g] = c.generators()[g].p_max;
    }
    for (size_t k = 0; k < limited.size(); ++k) lo[ng + n + k] = 0.0;
    ph.add_box(lo, hi);
    for (size_t k = 0; k < limited.size(); ++k) {
      const int l = limited[k];
      Vec row = flow_row(l, nv);
      row[ng + n + k] = -1.0;
      ph.add_ineq(row, c.branches()[l].p_max);
      Vec neg = -flow_row(l, nv);
      neg[ng + n + k] = -1.0;
      ph.add_ineq(neg, c.branches()[l].p_max);
    }
    QpSolution s1 = solve_qp(ph);
    if (s1.status != QpStatus::Optimal || s1.objective > 1e-6)
      fail_invalid("infeasible: load exceeds deliverable capacity");
  }

  const int nv = ng + n;
  QpProblem p = QpProblem::sized(nv, n + 1, 0);
  balance_rows(p, nv);
  for (int g = 0; g < ng; ++g) {
    const QuadCost& q = c.generators()[g].cost;
    p.Q(g, g) = 2.0 * q.c2;
    p.c[g] = q.c1;
    p.c0 += q.c0;
  }
  if (angle_penalty_weight > 0.0) {
    Mat AtA = dc.A.transpose() * dc.A;
    p.Q.block(ng, ng, n, n) += 2.0 * angle_penalty_weight * AtA;
  }
  Vec lo = Vec::Constant(nv, -kInf), hi = Vec::Constant(nv, kInf);
  for (int g = 0; g < ng; ++g) {
    lo[g] = c.generators()[g].p_min;
    hi[g] = c.generators()[g].p_max;
  }
  p.add_box(lo, hi);
  for (int l : limited) {
    p.add_ineq(flow_row(l, nv), c.branches()[l].p_max);
    p.add_ineq(-flow_row(l, nv), c.branches()[l].p_max);
  }

  QpSolution s = solve_qp(p);
  if (s.status != QpStatus::Optimal)
    fail_numeric("dc opf did not reach optimality");

  DispatchSolution sol;
  sol.p_gen = s.x.head(ng);
  sol.theta = s.x.tail(n);
  sol.lmp = s.eq_duals.head(n);
  sol.lambda = sol.lmp[ref];
  sol.objective = s.objective;
  for (int g = 0; g < ng; ++g) {
    if (sol.p_gen[g] < c.generators()[g].p_min + 1e-7 ||
        sol.p_gen[g] > c.generators()[g].p_max - 1e-7)
      sol.binding_gens.push_back(g);
  }
  for (int l : limited) {
    const double flow = (sol.theta[c.from_index(l)] - sol.theta[c.to_index(l)]) /
                        c.branches()[l].x;
    if (std::abs(flow) > c.branches()[l].p_max - 1e-6)
      sol.binding_lines.push_back(l);
  }
  return sol;
}

double weibull_quantile(double shape, double scale, double u) {
  if (!(shape > 0.0) || !(scale > 0.0)) fail_invalid("weibull parameters positive");
  if (!(u >= 0.0 && u < 1.0)) fail_invalid("quantile level in [0,1)");
  return scale * std::pow(-std::log(1.0 - u), 1.0 / shape);
}

DispatchSolution chance_ed(const std::vector<GenSpec>& gens, double load,
                           const WindSpec& wind) {
  if (!(wind.epsilon > 0.0 && wind.epsilon < 1.0))
    fail_invalid("reliability level must lie in (0,1)");
  double q;
  if (wind.weibull) {
    auto [shape, scale] = *wind.weibull;
    q = weibull_quantile(shape, scale, 1.0 - wind.epsilon);
  } else if (wind.forecast) {
    q = *wind.forecast;  // point-mass wind: every quantile equals the forecast
  } else {
    fail_invalid("chance dispatch needs a wind distribution or forecast");
  }

  double cap_lo = 0.0, cap_hi = 0.0;
  for (const GenSpec& g : gens) {
    cap_lo += g.p_min;
    cap_hi += g.p_max;
  }
  const double firmed = load - q;
  if (firmed > cap_hi + 1e-9)
    fail_invalid("infeasible after firming the wind quantile");

  if (firmed <= cap_lo + 1e-12) {
    // the inequality balance is slack: everything at minimum, zero price
    DispatchSolution sol;
    sol.p_gen.resize(gens.size());
    for (size_t i = 0; i < gens.size(); ++i) sol.p_gen[i] = gens[i].p_min;
    sol.lambda = 0.0;
    double obj = 0.0;
    for (size_t i = 0; i < gens.size(); ++i) obj += gens[i].cost.value(sol.p_gen[i]);
    sol.objective = obj;
    for (size_t i = 0; i < gens.size(); ++i) sol.binding_gens.push_back(i);
    return sol;
  }
  return economic_dispatch(gens, firmed);
}

}  // namespace gridkit
