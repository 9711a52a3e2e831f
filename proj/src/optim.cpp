#include "optim.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace gridkit {

QpProblem QpProblem::sized(int n, int me, int mi) {
  QpProblem p;
  p.Q = Mat::Zero(n, n);
  p.c = Vec::Zero(n);
  p.A_eq = Mat::Zero(me, n);
  p.b_eq = Vec::Zero(me);
  p.A_in = Mat::Zero(mi, n);
  p.b_in = Vec::Zero(mi);
  return p;
}

void QpProblem::add_box(const Vec& lo, const Vec& hi) {
  for (int i = 0; i < n(); ++i) {
    if (std::isfinite(hi[i])) {
      Vec row = Vec::Zero(n());
      row[i] = 1.0;
      add_ineq(row, hi[i]);
    }
    if (std::isfinite(lo[i])) {
      Vec row = Vec::Zero(n());
      row[i] = -1.0;
      add_ineq(row, -lo[i]);
    }
  }
}

void QpProblem::add_ineq(const Vec& row, double rhs) {
  const int m = static_cast<int>(A_in.rows());
  A_in.conservativeResize(m + 1, n());
  A_in.row(m) = row.transpose();
  b_in.conservativeResize(m + 1);
  b_in[m] = rhs;
}

void QpProblem::validate() const {
  const int nn = n();
  if (c.size() != nn || Q.cols() != nn) fail_invalid("qp: inconsistent dimensions");
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != nn))
    fail_invalid("qp: equality block dimensions");
  if (A_in.rows() != b_in.size() || (A_in.rows() > 0 && A_in.cols() != nn))
    fail_invalid("qp: inequality block dimensions");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + Q.cwiseAbs().maxCoeff()))
    fail_invalid("qp: Q not symmetric");
  // PSD check via Cholesky of Q + eps I
  Mat Qr = Q + 1e-10 * (1.0 + Q.diagonal().cwiseAbs().maxCoeff()) *
                   Mat::Identity(nn, nn);
  Eigen::LLT<Mat> llt(Qr);
  if (llt.info() != Eigen::Success) fail_invalid("qp: Q not positive semidefinite");
}

namespace {

double step_to_boundary(const Vec& v, const Vec& dv, double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -tau * v[i] / dv[i]);
  return alpha;
}

}  // namespace

QpSolution solve_qp(const QpProblem& p, const QpOptions& opt) {
  p.validate();
  const int n = p.n();
  const int me = static_cast<int>(p.A_eq.rows());
  const int mi = static_cast<int>(p.A_in.rows());

  QpSolution sol;
  const double obj_scale = 1.0 + std::max(p.c.cwiseAbs().maxCoeff(),
                                          p.Q.cwiseAbs().maxCoeff());
  const double beq_scale = 1.0 + (me ? p.b_eq.cwiseAbs().maxCoeff() : 0.0);
  const double bin_scale = 1.0 + (mi ? p.b_in.cwiseAbs().maxCoeff() : 0.0);

  auto finish = [&](const Vec& x, const Vec& y, const Vec& z, int iters,
                    QpStatus status, double kkt) {
    sol.x = x;
    sol.eq_duals = -y;  // price convention
    sol.in_duals = z;
    sol.objective = 0.5 * x.dot(p.Q * x) + p.c.dot(x) + p.c0;
    sol.iterations = iters;
    sol.status = status;
    sol.kkt_residual = kkt;
    return sol;
  };

  if (mi == 0) {
    // pure equality QP: one KKT solve
    Mat K = Mat::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = p.Q + 1e-12 * Mat::Identity(n, n);
    if (me) {
      K.topRightCorner(n, me) = p.A_eq.transpose();
      K.bottomLeftCorner(me, n) = p.A_eq;
    }
    Vec rhs(n + me);
    rhs.head(n) = -p.c;
    rhs.tail(me) = p.b_eq;
    Eigen::FullPivLU<Mat> lu(K);
    if (!lu.isInvertible()) fail_numeric("qp: singular equality KKT system");
    Vec xy = lu.solve(rhs);
    Vec x = xy.head(n), y = xy.tail(me);
    double kkt = (p.Q * x + p.c + p.A_eq.transpose() * y).cwiseAbs().maxCoeff();
    return finish(x, y, Vec(), 1, QpStatus::Optimal, kkt);
  }

  // starting point: equality least squares for x, unit slacks/duals
  Vec x = Vec::Zero(n);
  if (me > 0)
    x = p.A_eq.colPivHouseholderQr().solve(p.b_eq);
  Vec s(mi), z = Vec::Ones(mi);
  Vec gap0 = p.b_in - p.A_in * x;
  for (int i = 0; i < mi; ++i) s[i] = std::max(1.0, std::abs(gap0[i]));
  Vec y = Vec::Zero(me);

  const double tau = 0.995;
  double kkt = kInf;
  for (int it = 0; it < opt.max_iter; ++it) {
    Vec r_d = p.Q * x + p.c + p.A_in.transpose() * z;
    if (me) r_d += p.A_eq.transpose() * y;
    Vec r_p = me ? Vec(p.A_eq * x - p.b_eq) : Vec();
    Vec r_i = p.A_in * x + s - p.b_in;
    double mu = s.dot(z) / mi;

    double rd_n = r_d.cwiseAbs().maxCoeff() / obj_scale;
    double rp_n = me ? r_p.cwiseAbs().maxCoeff() / beq_scale : 0.0;
    double ri_n = r_i.cwiseAbs().maxCoeff() / bin_scale;
    kkt = std::max({rd_n, rp_n, ri_n, mu});
    if (kkt <= opt.tol) return finish(x, y, z, it, QpStatus::Optimal, kkt);

    // divergence certificate: complementarity has collapsed but primal
    // infeasibility persists, or the duals blow up
    if ((mu < 1e-10 && std::max(rp_n, ri_n) > 1e-6) ||
        z.cwiseAbs().maxCoeff() > 1e12 || (me && y.cwiseAbs().maxCoeff() > 1e12))
      return finish(x, y, z, it, QpStatus::Infeasible, kkt);

    Vec zs = z.cwiseQuotient(s);
    Mat H = p.Q + p.A_in.transpose() * zs.asDiagonal() * p.A_in;
    H.diagonal().array() += 1e-11 * obj_scale;

    // full augmented KKT; robust when variables appear only in equalities
    Mat K = Mat::Zero(n + me, n + me);
    K.topLeftCorner(n, n) = H;
    if (me) {
      K.topRightCorner(n, me) = p.A_eq.transpose();
      K.bottomLeftCorner(me, n) = p.A_eq;
      K.bottomRightCorner(me, me).diagonal().array() -= 1e-13 * beq_scale;
    }
    Eigen::PartialPivLU<Mat> kfac(K);

    bool refactored = false;
    auto solve_kkt = [&](const Vec& F4, Vec& dx, Vec& dy, Vec& ds, Vec& dz) {
      Vec rhs(n + me);
      rhs.head(n) = -r_d - p.A_in.transpose() *
                               ((z.cwiseProduct(r_i) - F4).cwiseQuotient(s));
      if (me) rhs.tail(me) = -r_p;
      Vec sol_xy = kfac.solve(rhs);
      if (!sol_xy.allFinite() && !refactored) {
        refactored = true;
        Mat K2 = K;
        K2.topLeftCorner(n, n).diagonal().array() += 1e-8 * obj_scale;
        kfac.compute(K2);
        sol_xy = kfac.solve(rhs);
      }
      if (!sol_xy.allFinite()) fail_numeric("qp: KKT factorization failed");
      dx = sol_xy.head(n);
      dy = me ? Vec(sol_xy.tail(me)) : Vec();
      ds = -r_i - p.A_in * dx;
      dz = (z.cwiseProduct(p.A_in * dx) + z.cwiseProduct(r_i) - F4)
               .cwiseQuotient(s);
    };

    // predictor
    Vec dx_a, dy_a, ds_a, dz_a;
    solve_kkt(s.cwiseProduct(z), dx_a, dy_a, ds_a, dz_a);
    double ap = step_to_boundary(s, ds_a, 1.0);
    double ad = step_to_boundary(z, dz_a, 1.0);
    double mu_aff = (s + ap * ds_a).dot(z + ad * dz_a) / mi;
    double sigma = std::pow(mu_aff / mu, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // corrector
    Vec F4 = s.cwiseProduct(z) + ds_a.cwiseProduct(dz_a) -
             Vec::Constant(mi, sigma * mu);
    Vec dx, dy, ds, dz;
    solve_kkt(F4, dx, dy, ds, dz);

    double alpha_p = step_to_boundary(s, ds, tau);
    double alpha_d = step_to_boundary(z, dz, tau);
    x += alpha_p * dx;
    s += alpha_p * ds;
    if (me) y += alpha_d * dy;
    z += alpha_d * dz;
  }
  return finish(x, y, z, opt.max_iter, QpStatus::MaxIter, kkt);
}

double bisect(const std::function<double(double)>& f, double lo, double hi,
              double tol) {
  if (!(lo < hi)) fail_invalid("bisect: empty interval");
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    fail_invalid("bisect: same-sign endpoints");
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SubgradientResult subgradient_max(const ConcaveOracle& oracle, const Vec& lambda0,
                                  const SubgradientOptions& opt) {
  SubgradientResult res;
  Vec lambda = lambda0;
  res.lambda_best = lambda0;
  res.trace.reserve(opt.iterations);
  for (int k = 0; k < opt.iterations; ++k) {
    auto [value, grad] = oracle(lambda);
    if (value > res.value_best) {
      res.value_best = value;
      res.lambda_best = lambda;
    }
    res.trace.push_back(res.value_best);
    const double step = opt.step_a / (opt.step_b + k);
    lambda += step * grad;
  }
  return res;
}

}  // namespace gridkit
