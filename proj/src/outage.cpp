#include "outage.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "optim.hpp"
#include "powerflow.hpp"

namespace gridkit {

OutageModel build_outage_model(const DcModel& dc, const Vec& theta_pre,
                               const Vec& theta_post,
                               const std::vector<int>& internal_buses, int ref) {
  const int n = static_cast<int>(dc.Bx.rows());
  const int nl = static_cast<int>(dc.A.rows());
  if (theta_pre.size() != n || theta_post.size() != n)
    fail_invalid("angle vector dimension mismatch");
  if (internal_buses.empty()) fail_invalid("internal bus set is empty");
  bool ref_internal = false;
  for (int b : internal_buses) {
    if (b < 0 || b >= n) fail_invalid("internal bus index out of range");
    if (b == ref) ref_internal = true;
  }
  if (!ref_internal) fail_invalid("reference bus must be internal");

  // reduced pre-event Laplacian
  Mat Br(n - 1, n - 1);
  std::vector<int> red(n, -1);
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == ref) continue;
    red[i] = ri++;
  }
  for (int i = 0; i < n; ++i) {
    if (i == ref) continue;
    for (int j = 0; j < n; ++j) {
      if (j == ref) continue;
      Br(red[i], red[j]) = dc.Bx(i, j);
    }
  }
  Eigen::FullPivLU<Mat> lu(Br);
  if (!lu.isInvertible())
    fail_numeric("pre-event network is disconnected");

  // responses of all candidate outages: B_r^{-1} A_red'
  Mat Ared(nl, n - 1);
  for (int l = 0; l < nl; ++l)
    for (int j = 0; j < n; ++j)
      if (j != ref) Ared(l, red[j]) = dc.A(l, j);
  Mat resp = lu.solve(Ared.transpose());  // (n-1) x nl

  OutageModel model;
  model.ref = ref;
  model.n_lines = nl;
  for (int b : internal_buses)
    if (b != ref) model.internal_rows.push_back(b);
  std::sort(model.internal_rows.begin(), model.internal_rows.end());

  const int rows = static_cast<int>(model.internal_rows.size());
  model.F.resize(rows, nl);
  model.observation.resize(rows);
  for (int r = 0; r < rows; ++r) {
    const int b = model.internal_rows[r];
    model.F.row(r) = resp.row(red[b]);
    model.observation[r] = theta_post[b] - theta_pre[b];
  }
  return model;
}

namespace {

// least-squares fit of the observation on the chosen columns
std::pair<Vec, double> fit_support(const OutageModel& model,
                                   const std::vector<int>& support) {
  const Vec& y = model.observation;
  if (support.empty()) return {Vec(), y.norm()};
  Mat Fs(y.size(), support.size());
  for (size_t j = 0; j < support.size(); ++j) Fs.col(j) = model.F.col(support[j]);
  Vec coef = Fs.colPivHouseholderQr().solve(y);
  double res = (y - Fs * coef).norm();
  return {coef, res};
}

OutageEstimate package(const OutageModel& model, std::vector<int> support) {
  std::sort(support.begin(), support.end());
  auto [coef, res] = fit_support(model, support);
  OutageEstimate est;
  est.lines = support;
  est.m_hat = Vec::Zero(model.n_lines);
  for (size_t j = 0; j < support.size(); ++j) est.m_hat[support[j]] = coef[j];
  est.residual = res;
  return est;
}

}  // namespace

OutageEstimate identify_exhaustive(const OutageModel& model, int k) {
  if (k < 1 || k > 2)
    fail_invalid("exhaustive search supports only k in {1, 2}");
  const int nl = model.n_lines;
  std::vector<int> best;
  double best_res = kInf;
  if (k == 1) {
    for (int l = 0; l < nl; ++l) {
      double res = fit_support(model, {l}).second;
      if (res < best_res - 1e-15) {
        best = {l};
        best_res = res;
      }
    }
  } else {
    for (int i = 0; i < nl; ++i) {
      for (int j = i + 1; j < nl; ++j) {
        double res = fit_support(model, {i, j}).second;
        if (res < best_res - 1e-15) {
          best = {i, j};
          best_res = res;
        }
      }
    }
  }
  return package(model, best);
}

OutageEstimate identify_omp(const OutageModel& model, int max_support,
                            double residual_threshold) {
  if (max_support < 0 || max_support > model.n_lines)
    fail_invalid("omp support size out of range");
  if (max_support == 0) return package(model, {});
  const Vec& y = model.observation;
  const double tie_tol = 1e-9 * (1.0 + y.norm());

  std::vector<char> usable(model.n_lines, 0);
  for (int l = 0; l < model.n_lines; ++l)
    usable[l] = model.F.col(l).norm() > 1e-14;

  // orthogonal greedy extension: each step adds the column whose LS refit
  // leaves the smallest residual
  auto extend = [&](std::vector<int> sup) {
    std::vector<char> used(model.n_lines, 0);
    for (int l : sup) used[l] = 1;
    double cur = fit_support(model, sup).second;
    while (static_cast<int>(sup.size()) < max_support &&
           cur > residual_threshold) {
      int best = -1;
      double best_res = cur;
      for (int l = 0; l < model.n_lines; ++l) {
        if (used[l] || !usable[l]) continue;
        sup.push_back(l);
        double r = fit_support(model, sup).second;
        sup.pop_back();
        if (r < best_res - 1e-15) {
          best_res = r;
          best = l;
        }
      }
      if (best < 0) break;
      used[best] = 1;
      sup.push_back(best);
      cur = best_res;
    }
    std::sort(sup.begin(), sup.end());
    return std::make_pair(sup, cur);
  };

  // greedy selection is restarted from every candidate first column; near-tied
  // fits resolve to the lexicographically smallest support, matching the
  // exhaustive oracle's tie-break
  std::vector<int> best_sup;
  double best_res = kInf;
  for (int s = 0; s < model.n_lines; ++s) {
    if (!usable[s]) continue;
    auto [sup, res] = extend({s});
    const bool better = res < best_res - tie_tol;
    const bool tied = std::abs(res - best_res) <= tie_tol;
    if (better || (tied && sup < best_sup)) {
      best_sup = sup;
      best_res = res;
    }
  }

  // single-swap refinement pass, strict improvements only
  bool improved = true;
  while (improved) {
    improved = false;
    for (size_t pos = 0; pos < best_sup.size(); ++pos) {
      for (int l = 0; l < model.n_lines; ++l) {
        if (!usable[l] ||
            std::find(best_sup.begin(), best_sup.end(), l) != best_sup.end())
          continue;
        std::vector<int> cand = best_sup;
        cand[pos] = l;
        std::sort(cand.begin(), cand.end());
        double r = fit_support(model, cand).second;
        if (r < best_res - tie_tol) {
          best_sup = cand;
          best_res = r;
          improved = true;
        }
      }
    }
  }
  return package(model, best_sup);
}

GridCase remove_branches(const GridCase& c, const std::vector<int>& lines) {
  std::vector<char> drop(c.n_branches(), 0);
  for (int l : lines) {
    if (l < 0 || l >= c.n_branches()) fail_invalid("branch index out of range");
    drop[l] = 1;
  }
  std::vector<Branch> kept;
  for (int l = 0; l < c.n_branches(); ++l)
    if (!drop[l]) kept.push_back(c.branches()[l]);
  return GridCase(c.buses(), kept, c.generators(), c.loads());
}

std::pair<Vec, Vec> simulate_line_outage(const GridCase& c, const Vec& p,
                                         const std::vector<int>& lines, int ref) {
  DcModel pre = build_dc(c);
  Vec theta_pre = solve_dc(pre, p, ref);
  GridCase post_case = remove_branches(c, lines);
  DcModel post = build_dc(post_case);
  Vec theta_post = solve_dc(post, p, ref);  // throws if disconnected
  return {theta_pre, theta_post};
}

}  // namespace gridkit
