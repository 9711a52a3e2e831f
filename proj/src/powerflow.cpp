#include "powerflow.hpp"

#include <Eigen/LU>
#include <cmath>

namespace gridkit {

void PfSpec::validate(const GridCase& c) const {
  const int n = c.n_buses();
  std::vector<int> seen(n, 0);
  if (slack_bus < 0 || slack_bus >= n) fail_invalid("slack bus index out of range");
  seen[slack_bus]++;
  for (const auto& b : pv) {
    if (b.bus < 0 || b.bus >= n) fail_invalid("PV bus index out of range");
    seen[b.bus]++;
  }
  for (const auto& b : pq) {
    if (b.bus < 0 || b.bus >= n) fail_invalid("PQ bus index out of range");
    seen[b.bus]++;
  }
  for (int i = 0; i < n; ++i) {
    if (seen[i] == 0)
      fail_invalid("bus " + std::to_string(c.buses()[i].id) +
                   " not classified in power flow spec");
    if (seen[i] > 1)
      fail_invalid("bus " + std::to_string(c.buses()[i].id) +
                   " classified more than once");
  }
}

Vec solve_dc(const DcModel& model, const Vec& p, int ref_index) {
  const int n = static_cast<int>(model.Bx.rows());
  if (p.size() != n) fail_invalid("injection vector dimension mismatch");
  if (ref_index < 0 || ref_index >= n) fail_invalid("reference bus out of range");
  if (std::abs(p.sum()) > 1e-9)
    fail_invalid("unbalanced injections: sum(p) = " + std::to_string(p.sum()));

  // reduced (N_b - 1) system with the reference row/column removed
  Mat Br(n - 1, n - 1);
  Vec pr(n - 1);
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == ref_index) continue;
    pr[ri] = p[i];
    for (int j = 0, rj = 0; j < n; ++j) {
      if (j == ref_index) continue;
      Br(ri, rj++) = model.Bx(i, j);
    }
    ++ri;
  }
  Eigen::FullPivLU<Mat> lu(Br);
  if (!lu.isInvertible())
    fail_numeric("singular reduced system (disconnected network)");
  Vec tr = lu.solve(pr);

  Vec theta = Vec::Zero(n);
  for (int i = 0, ri = 0; i < n; ++i)
    if (i != ref_index) theta[i] = tr[ri++];

  if ((model.Bx * theta - p).cwiseAbs().maxCoeff() > 1e-10)
    fail_numeric("dc solve residual above tolerance");
  return theta;
}

PfSolution solve_ac(const GridCase& c, const PfSpec& spec, const PfOptions& opt) {
  spec.validate(c);
  const int n = c.n_buses();
  AdmittanceModel adm = build_admittance(c);
  const Mat& G = adm.G;
  const Mat& B = adm.B;

  Vec p_spec = Vec::Zero(n), q_spec = Vec::Zero(n);
  std::vector<char> is_pq(n, 0);
  for (const auto& b : spec.pv) p_spec[b.bus] = b.p;
  for (const auto& b : spec.pq) {
    p_spec[b.bus] = b.p;
    q_spec[b.bus] = b.q;
    is_pq[b.bus] = 1;
  }

  // unknown layout: theta at non-slack buses, then V at PQ buses
  std::vector<int> theta_vars, v_vars, p_rows, q_rows;
  for (int i = 0; i < n; ++i) {
    if (i != spec.slack_bus) {
      theta_vars.push_back(i);
      p_rows.push_back(i);
    }
    if (is_pq[i]) {
      v_vars.push_back(i);
      q_rows.push_back(i);
    }
  }
  const int nt = static_cast<int>(theta_vars.size());
  const int nv = static_cast<int>(v_vars.size());
  const int nx = nt + nv;

  PfSolution sol;
  sol.state = ComplexState::flat(n);
  sol.state.vm[spec.slack_bus] = spec.slack_v;
  for (const auto& b : spec.pv) sol.state.vm[b.bus] = b.v;

  Vec& vm = sol.state.vm;
  Vec& va = sol.state.va;

  auto mismatch = [&](Vec& f) {
    PQ inj = ac_injections(adm, sol.state, Coords::Polar);
    f.resize(nx);
    for (int r = 0; r < nt; ++r) f[r] = p_spec[p_rows[r]] - inj.p[p_rows[r]];
    for (int r = 0; r < nv; ++r) f[nt + r] = q_spec[q_rows[r]] - inj.q[q_rows[r]];
    return inj;
  };

  Vec f;
  for (sol.iterations = 0; sol.iterations < opt.max_iter; ++sol.iterations) {
    PQ inj = mismatch(f);
    sol.mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    if (sol.mismatch < opt.tol) {
      sol.converged = true;
      break;
    }

    Mat J = Mat::Zero(nx, nx);
    for (int r = 0; r < nt; ++r) {
      const int m = p_rows[r];
      for (int col = 0; col < nt; ++col) {
        const int k = theta_vars[col];
        if (k == m)
          J(r, col) = -inj.q[m] - B(m, m) * vm[m] * vm[m];
        else {
          const double th = va[m] - va[k];
          J(r, col) =
              vm[m] * vm[k] * (G(m, k) * std::sin(th) - B(m, k) * std::cos(th));
        }
      }
      for (int col = 0; col < nv; ++col) {
        const int k = v_vars[col];
        if (k == m)
          J(r, nt + col) = inj.p[m] / vm[m] + G(m, m) * vm[m];
        else {
          const double th = va[m] - va[k];
          J(r, nt + col) = vm[m] * (G(m, k) * std::cos(th) + B(m, k) * std::sin(th));
        }
      }
    }
    for (int r = 0; r < nv; ++r) {
      const int m = q_rows[r];
      for (int col = 0; col < nt; ++col) {
        const int k = theta_vars[col];
        if (k == m)
          J(nt + r, col) = inj.p[m] - G(m, m) * vm[m] * vm[m];
        else {
          const double th = va[m] - va[k];
          J(nt + r, col) =
              -vm[m] * vm[k] * (G(m, k) * std::cos(th) + B(m, k) * std::sin(th));
        }
      }
      for (int col = 0; col < nv; ++col) {
        const int k = v_vars[col];
        if (k == m)
          J(nt + r, nt + col) = inj.q[m] / vm[m] - B(m, m) * vm[m];
        else {
          const double th = va[m] - va[k];
          J(nt + r, nt + col) =
              vm[m] * (G(m, k) * std::sin(th) - B(m, k) * std::cos(th));
        }
      }
    }

    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible()) fail_numeric("singular power flow Jacobian");
    Vec dx = lu.solve(f);
    for (int i = 0; i < nt; ++i) va[theta_vars[i]] += dx[i];
    for (int i = 0; i < nv; ++i) vm[v_vars[i]] += dx[nt + i];
  }
  if (!sol.converged) {
    mismatch(f);
    sol.mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    sol.converged = sol.mismatch < opt.tol;
  }

  // post-hoc reactive limit check at PV buses (PV->PQ switching not modeled)
  if (sol.converged && !c.generators().empty()) {
    PQ inj = ac_injections(adm, sol.state, Coords::Polar);
    Vec ql = c.load_q();
    for (const auto& b : spec.pv) {
      double q_gen = inj.q[b.bus] + ql[b.bus];
      double lo = 0.0, hi = 0.0;
      bool has_gen = false;
      for (const auto& g : c.generators()) {
        if (c.bus_index(g.bus) == b.bus) {
          lo += g.q_min;
          hi += g.q_max;
          has_gen = true;
        }
      }
      if (has_gen && (q_gen < lo - 1e-9 || q_gen > hi + 1e-9))
        sol.q_violations.push_back(b.bus);
    }
  }
  return sol;
}

}  // namespace gridkit
