#include "flexload.hpp"

#include <algorithm>
#include <cmath>

namespace gridkit {

void DrInstance::validate() const {
  if (periods < 1) fail_invalid("dr: need at least one period");
  if (lse_c2.size() != periods || lse_c1.size() != periods)
    fail_invalid("dr: supply cost coefficient length mismatch");
  if (lse_c2.minCoeff() < 0.0) fail_invalid("dr: supply cost must be convex");
  if (s_min > s_max) fail_invalid("dr: empty supply range");
  if (users.empty()) fail_invalid("dr: need at least one user");
  for (const DrUser& u : users) {
    for (const Appliance& a : u.appliances) {
      if (a.u1.size() != periods || a.u2.size() != periods ||
          a.p_min.size() != periods || a.p_max.size() != periods)
        fail_invalid("dr: appliance vector length mismatch");
      if (a.u2.minCoeff() < 0.0) fail_invalid("dr: utility must be concave");
      double lo = 0.0, hi = 0.0;
      for (int t = 0; t < periods; ++t) {
        if (a.p_min[t] > a.p_max[t]) fail_invalid("dr: empty appliance range");
        lo += a.p_min[t];
        hi += a.p_max[t];
      }
      if (a.energy_kind == Appliance::Energy::Equal &&
          (a.energy < lo - 1e-9 || a.energy > hi + 1e-9))
        fail_invalid("dr: infeasible appliance energy requirement");
    }
  }
}

void PevFleet::validate() const {
  const int T = static_cast<int>(base_demand.size());
  if (T < 1) fail_invalid("pev: empty horizon");
  if (vehicles.empty()) fail_invalid("pev: no vehicles");
  for (const Vehicle& v : vehicles) {
    if (v.r_min.size() != T || v.r_max.size() != T)
      fail_invalid("pev: rate bound length mismatch");
    double lo = 0.0, hi = 0.0;
    for (int t = 0; t < T; ++t) {
      if (v.r_min[t] > v.r_max[t]) fail_invalid("pev: empty rate range");
      lo += v.r_min[t];
      hi += v.r_max[t];
    }
    if (v.energy < lo - 1e-9 || v.energy > hi + 1e-9)
      fail_invalid("pev: infeasible energy requirement");
  }
}

namespace {

// min sum_t 0.5 q_t r^2 + l_t r  over [lo,hi], optionally with sum r = B.
// q must be strictly positive. The multiplier search is a scalar bisection;
// the small remaining imbalance is distributed over interior slots.
Vec box_energy_qp(const Vec& q, const Vec& l, const Vec& lo, const Vec& hi,
                  bool with_energy, double B) {
  const int T = static_cast<int>(q.size());
  auto eval = [&](double mu) {
    Vec r(T);
    for (int t = 0; t < T; ++t)
      r[t] = std::clamp(-(l[t] + mu) / q[t], lo[t], hi[t]);
    return r;
  };
  if (!with_energy) return eval(0.0);

  double span = 0.0;
  for (int t = 0; t < T; ++t)
    span = std::max({span, std::abs(l[t]), q[t] * std::max(std::abs(lo[t]),
                                                           std::abs(hi[t]))});
  double mu_lo = -(span + 1.0), mu_hi = span + 1.0;
  // g(mu) = sum r(mu) - B is nonincreasing
  auto g = [&](double mu) { return eval(mu).sum() - B; };
  while (g(mu_lo) < 0.0) mu_lo = 2.0 * mu_lo - 1.0;
  while (g(mu_hi) > 0.0) mu_hi = 2.0 * mu_hi + 1.0;
  double mu = bisect([&](double m) { return -g(m); }, mu_lo, mu_hi, 1e-13);
  Vec r = eval(mu);

  // close the residual exactly through the interior slots
  for (int pass = 0; pass < 4; ++pass) {
    double res = B - r.sum();
    if (std::abs(res) < 1e-14) break;
    double wsum = 0.0;
    for (int t = 0; t < T; ++t)
      if (r[t] > lo[t] + 1e-12 && r[t] < hi[t] - 1e-12) wsum += 1.0 / q[t];
    if (wsum <= 0.0) break;
    for (int t = 0; t < T; ++t)
      if (r[t] > lo[t] + 1e-12 && r[t] < hi[t] - 1e-12)
        r[t] = std::clamp(r[t] + res / (q[t] * wsum), lo[t], hi[t]);
  }
  return r;
}

// appliance response to posted prices: max U(p) - pi'p over its set
Vec appliance_response(const Appliance& a, const Vec& pi) {
  Vec q = a.u2;
  Vec l = pi - a.u1;
  if (a.energy_kind == Appliance::Energy::None)
    return box_energy_qp(q, l, a.p_min, a.p_max, false, 0.0);
  if (a.energy_kind == Appliance::Energy::Equal)
    return box_energy_qp(q, l, a.p_min, a.p_max, true, a.energy);
  // at-most: unconstrained first, then pin to the cap if exceeded
  Vec p = box_energy_qp(q, l, a.p_min, a.p_max, false, 0.0);
  if (p.sum() <= a.energy + 1e-12) return p;
  return box_energy_qp(q, l, a.p_min, a.p_max, true, a.energy);
}

double appliance_utility(const Appliance& a, const Vec& p) {
  double u = 0.0;
  for (int t = 0; t < p.size(); ++t)
    u += a.u1[t] * p[t] - 0.5 * a.u2[t] * p[t] * p[t];
  return u;
}

// in-process message records between the aggregator and the agents; the
// same payloads could back a networked deployment
struct PriceSignal {
  int iteration = 0;
  Vec prices;
};
struct ProfileReport {
  int agent = 0;
  Vec profile;
};

class Mailbox {
 public:
  void post_price(PriceSignal s) { price_ = std::move(s); }
  const PriceSignal& price() const { return price_; }
  void post_profile(ProfileReport r) { inbox_.push_back(std::move(r)); }
  std::vector<ProfileReport> collect_profiles() {
    std::vector<ProfileReport> out;
    out.swap(inbox_);
    return out;
  }

 private:
  PriceSignal price_;
  std::vector<ProfileReport> inbox_;
};

DrResult dr_central(const DrInstance& inst) {
  const int T = inst.periods;
  // variables: s (T), then appliance blocks of length T
  int n_app = 0;
  for (const DrUser& u : inst.users) n_app += static_cast<int>(u.appliances.size());
  const int nv = T * (1 + n_app);

  int n_eq = T;
  for (const DrUser& u : inst.users)
    for (const Appliance& a : u.appliances)
      if (a.energy_kind == Appliance::Energy::Equal) ++n_eq;

  QpProblem qp = QpProblem::sized(nv, n_eq, 0);
  Vec lo = Vec::Constant(nv, -kInf), hi = Vec::Constant(nv, kInf);
  for (int t = 0; t < T; ++t) {
    qp.Q(t, t) = 2.0 * inst.lse_c2[t];
    qp.c[t] = inst.lse_c1[t];
    lo[t] = inst.s_min;
    hi[t] = inst.s_max;
  }
  int blk = T;
  int eq_row = T;
  std::vector<std::pair<int, const Appliance*>> blocks;
  for (const DrUser& u : inst.users) {
    for (const Appliance& a : u.appliances) {
      blocks.emplace_back(blk, &a);
      for (int t = 0; t < T; ++t) {
        qp.Q(blk + t, blk + t) = a.u2[t];
        qp.c[blk + t] = -a.u1[t];
        lo[blk + t] = a.p_min[t];
        hi[blk + t] = a.p_max[t];
        // balance s_t - sum p_t = 0; this orientation makes the reported
        // equality dual the per-period consumer price
        qp.A_eq(t, blk + t) = -1.0;
      }
      if (a.energy_kind == Appliance::Energy::Equal) {
        for (int t = 0; t < T; ++t) qp.A_eq(eq_row, blk + t) = 1.0;
        qp.b_eq[eq_row] = a.energy;
        ++eq_row;
      }
      blk += T;
    }
  }
  for (int t = 0; t < T; ++t) {
    qp.A_eq(t, t) = 1.0;
    qp.b_eq[t] = 0.0;
  }
  qp.add_box(lo, hi);
  for (const auto& [off, a] : blocks) {
    if (a->energy_kind == Appliance::Energy::AtMost) {
      Vec row = Vec::Zero(nv);
      for (int t = 0; t < T; ++t) row[off + t] = 1.0;
      qp.add_ineq(row, a->energy);
    }
  }

  QpSolution s = solve_qp(qp);
  if (s.status != QpStatus::Optimal)
    fail_numeric("dr: central welfare program did not reach optimality");

  DrResult res;
  res.supply = s.x.head(T);
  res.prices = s.eq_duals.head(T);
  size_t bi = 0;
  for (const DrUser& u : inst.users) {
    std::vector<Vec> per_user;
    for (size_t a = 0; a < u.appliances.size(); ++a) {
      per_user.push_back(s.x.segment(blocks[bi].first, T));
      ++bi;
    }
    res.schedules.push_back(std::move(per_user));
  }
  res.objective = s.objective;
  res.welfare = -res.objective;
  res.iterations = s.iterations;
  return res;
}

DrResult dr_dual(const DrInstance& inst, const DrOptions& opt) {
  const int T = inst.periods;
  for (int t = 0; t < T; ++t)
    if (inst.lse_c2[t] <= 0.0)
      fail_invalid("dr dual mode needs strictly convex supply cost");
  for (const DrUser& u : inst.users)
    for (const Appliance& a : u.appliances)
      if (a.u2.minCoeff() <= 0.0)
        fail_invalid("dr dual mode needs strictly concave utilities");

  Mailbox mailbox;
  Vec pi = inst.lse_c1;  // price guess: marginal supply cost at zero
  double best_dual = -kInf;
  Vec best_pi = pi;

  auto lse_supply = [&](const Vec& prices) {
    Vec s(T);
    for (int t = 0; t < T; ++t)
      s[t] = std::clamp((prices[t] - inst.lse_c1[t]) / (2.0 * inst.lse_c2[t]),
                        inst.s_min, inst.s_max);
    return s;
  };

  int it = 0;
  bool price_converged = false;
  for (; it < opt.iterations; ++it) {
    mailbox.post_price({it, pi});

    // each appliance solves its private subproblem against the posted price
    const Vec& posted = mailbox.price().prices;
    int agent = 0;
    double users_term = 0.0;
    for (const DrUser& u : inst.users) {
      for (const Appliance& a : u.appliances) {
        Vec p = appliance_response(a, posted);
        users_term += posted.dot(p) - appliance_utility(a, p);
        mailbox.post_profile({agent++, p});
      }
    }
    Vec s = lse_supply(posted);
    double lse_term = 0.0;
    for (int t = 0; t < T; ++t)
      lse_term += inst.lse_c2[t] * s[t] * s[t] + inst.lse_c1[t] * s[t] -
                  posted[t] * s[t];

    Vec total = Vec::Zero(T);
    for (const ProfileReport& r : mailbox.collect_profiles()) total += r.profile;
    const double dual_value = lse_term + users_term;
    if (dual_value > best_dual) {
      best_dual = dual_value;
      best_pi = posted;
    }

    const double step = opt.step_a / (opt.step_b + it);
    Vec delta = step * (total - s);
    pi += delta;
    if (delta.cwiseAbs().maxCoeff() < opt.price_tol) {
      price_converged = true;
      ++it;
      break;
    }
  }

  // primal recovery at the best prices
  DrResult res;
  res.prices = best_pi;
  res.iterations = it;
  Vec total = Vec::Zero(T);
  for (const DrUser& u : inst.users) {
    std::vector<Vec> per_user;
    for (const Appliance& a : u.appliances) {
      Vec p = appliance_response(a, best_pi);
      total += p;
      per_user.push_back(std::move(p));
    }
    res.schedules.push_back(std::move(per_user));
  }
  res.supply = total.cwiseMax(inst.s_min).cwiseMin(inst.s_max);
  double cost = 0.0;
  for (int t = 0; t < T; ++t)
    cost += inst.lse_c2[t] * res.supply[t] * res.supply[t] +
            inst.lse_c1[t] * res.supply[t];
  double utility = 0.0;
  size_t ui = 0;
  for (const DrUser& u : inst.users) {
    for (size_t a = 0; a < u.appliances.size(); ++a)
      utility += appliance_utility(u.appliances[a], res.schedules[ui][a]);
    ++ui;
  }
  res.objective = cost - utility;
  res.welfare = -res.objective;
  res.gap = res.objective - best_dual;  // weak duality: nonnegative at optimum
  res.converged = price_converged || std::abs(res.gap) <= 1e-3 * std::max(1.0, std::abs(res.objective));
  return res;
}

}  // namespace

DrResult dr_solve(const DrInstance& inst, DrMode mode, const DrOptions& opt) {
  inst.validate();
  return mode == DrMode::Central ? dr_central(inst) : dr_dual(inst, opt);
}

DrResult curtail_solve(const std::vector<DrUser>& users, double deficit) {
  DrInstance inst;
  inst.periods = 1;
  inst.lse_c2 = Vec::Zero(1);
  inst.lse_c1 = Vec::Zero(1);
  inst.s_min = deficit;
  inst.s_max = deficit;
  inst.users = users;
  double lo = 0.0, hi = 0.0;
  for (const DrUser& u : users)
    for (const Appliance& a : u.appliances) {
      lo += a.p_min[0];
      hi += a.p_max[0];
    }
  if (deficit < lo - 1e-9 || deficit > hi + 1e-9)
    fail_invalid("curtailment deficit outside the feasible range");
  return dr_solve(inst, DrMode::Central);
}

ChargingProfiles pev_central(const PevFleet& fleet) {
  fleet.validate();
  const int T = static_cast<int>(fleet.base_demand.size());
  const int N = static_cast<int>(fleet.vehicles.size());
  const int nv = N * T;

  // sum_t (D_t + sum_n r_nt)^2 expands into rank-one couplings per period
  QpProblem qp = QpProblem::sized(nv, N, 0);
  for (int t = 0; t < T; ++t) {
    for (int a = 0; a < N; ++a) {
      qp.c[a * T + t] += 2.0 * fleet.base_demand[t];
      for (int b = 0; b < N; ++b) qp.Q(a * T + t, b * T + t) += 2.0;
    }
  }
  Vec lo(nv), hi(nv);
  for (int n = 0; n < N; ++n) {
    for (int t = 0; t < T; ++t) {
      lo[n * T + t] = fleet.vehicles[n].r_min[t];
      hi[n * T + t] = fleet.vehicles[n].r_max[t];
    }
    for (int t = 0; t < T; ++t) qp.A_eq(n, n * T + t) = 1.0;
    qp.b_eq[n] = fleet.vehicles[n].energy;
  }
  qp.add_box(lo, hi);

  QpSolution s = solve_qp(qp);
  if (s.status != QpStatus::Optimal)
    fail_numeric("pev: valley-filling program did not reach optimality");

  ChargingProfiles out;
  out.rates = Mat::Zero(N, T);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) out.rates(n, t) = s.x[n * T + t];
  out.aggregate = fleet.base_demand + out.rates.colwise().sum().transpose();
  out.objective_trace.resize(1);
  out.objective_trace[0] = out.aggregate.squaredNorm();
  out.iterations = s.iterations;
  return out;
}

ChargingProfiles pev_distributed(const PevFleet& fleet, int max_iters,
                                 double tol) {
  fleet.validate();
  const int T = static_cast<int>(fleet.base_demand.size());
  const int N = static_cast<int>(fleet.vehicles.size());

  Mailbox mailbox;
  Mat rates = Mat::Zero(N, T);
  mailbox.post_price({0, fleet.base_demand});  // p^0(t) = D(t), r^0 = 0

  ChargingProfiles out;
  out.price_trace.resize(0, T);
  std::vector<double> objectives;

  int it = 0;
  bool converged = false;
  for (; it < max_iters; ++it) {
    const Vec posted = mailbox.price().prices;

    // per-vehicle proximal update against the posted price
    for (int n = 0; n < N; ++n) {
      const auto& v = fleet.vehicles[n];
      Vec q = Vec::Constant(T, static_cast<double>(N));
      Vec l = posted - static_cast<double>(N) * rates.row(n).transpose();
      Vec r = box_energy_qp(q, l, v.r_min, v.r_max, true, v.energy);
      mailbox.post_profile({n, std::move(r)});
    }

    double change = 0.0;
    for (ProfileReport& rep : mailbox.collect_profiles()) {
      change = std::max(
          change,
          (rep.profile - rates.row(rep.agent).transpose()).cwiseAbs().maxCoeff());
      rates.row(rep.agent) = rep.profile.transpose();
    }

    Vec load = fleet.base_demand + rates.colwise().sum().transpose();
    objectives.push_back(load.squaredNorm());
    out.price_trace.conservativeResize(out.price_trace.rows() + 1, T);
    out.price_trace.row(out.price_trace.rows() - 1) = load.transpose();
    mailbox.post_price({it + 1, load});

    if (change < tol) {
      converged = true;
      ++it;
      break;
    }
  }

  out.rates = rates;
  out.aggregate = fleet.base_demand + rates.colwise().sum().transpose();
  out.objective_trace =
      Eigen::Map<Vec>(objectives.data(), static_cast<Eigen::Index>(objectives.size()));
  out.iterations = it;
  out.converged = converged;
  return out;
}

}  // namespace gridkit
