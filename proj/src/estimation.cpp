#include "estimation.hpp"

#include <json.hpp>

#include <Eigen/QR>
#include <Eigen/SVD>
#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

namespace gridkit {

using nlohmann::json;

const char* meas_kind_name(MeasKind k) {
  switch (k) {
    case MeasKind::Vmag: return "Vmag";
    case MeasKind::Pinj: return "Pinj";
    case MeasKind::Qinj: return "Qinj";
    case MeasKind::Pflow: return "Pflow";
    case MeasKind::Qflow: return "Qflow";
    case MeasKind::PhasorV: return "PhasorV";
    case MeasKind::PhasorIline: return "PhasorIline";
  }
  return "?";
}

MeasKind meas_kind_from_name(const std::string& name) {
  for (MeasKind k : {MeasKind::Vmag, MeasKind::Pinj, MeasKind::Qinj,
                     MeasKind::Pflow, MeasKind::Qflow, MeasKind::PhasorV,
                     MeasKind::PhasorIline})
    if (name == meas_kind_name(k)) return k;
  fail_parse("unknown measurement kind \"" + name + "\"");
}

bool is_branch_kind(MeasKind k) {
  return k == MeasKind::Pflow || k == MeasKind::Qflow ||
         k == MeasKind::PhasorIline;
}

bool is_dc_kind(MeasKind k) {
  return k == MeasKind::Pinj || k == MeasKind::Pflow || k == MeasKind::PhasorV ||
         k == MeasKind::PhasorIline;
}

MeasurementSet::MeasurementSet(const GridCase& c, std::vector<Measurement> items)
    : items_(std::move(items)), n_buses_(c.n_buses()) {
  for (int l = 0; l < c.n_branches(); ++l) {
    bfrom_.push_back(c.from_index(l));
    bto_.push_back(c.to_index(l));
    bx_.push_back(c.branches()[l].x);
  }
  Bx_ = build_dc(c).Bx;
  for (int i = 0; i < size(); ++i) {
    const Measurement& m = items_[i];
    if (!(m.sigma > 0.0)) fail_invalid("measurement sigma must be positive");
    if (is_branch_kind(m.kind)) {
      if (m.branch < 0 || m.branch >= c.n_branches())
        fail_invalid("measurement references unknown branch");
    } else {
      if (m.bus < 0 || m.bus >= n_buses_)
        fail_invalid("measurement references unknown bus");
    }
    if (is_dc_kind(m.kind)) dc_rows_.push_back(i);
  }
}

namespace {

// Active-model row: coefficients of theta for one DC-compatible measurement.
Vec dc_row(const Measurement& m, const Mat& Bx, const std::vector<int>& bfrom,
           const std::vector<int>& bto, const std::vector<double>& bx) {
  Vec row = Vec::Zero(Bx.rows());
  switch (m.kind) {
    case MeasKind::Pinj:
      row = Bx.row(m.bus).transpose();
      break;
    case MeasKind::Pflow:
    case MeasKind::PhasorIline: {
      const int f = bfrom[m.branch], t = bto[m.branch];
      const double w = 1.0 / bx[m.branch];
      if (m.from_side) {
        row[f] = w;
        row[t] = -w;
      } else {
        row[t] = w;
        row[f] = -w;
      }
      break;
    }
    case MeasKind::PhasorV:
      row[m.bus] = 1.0;
      break;
    default:
      fail_invalid("not a DC-compatible measurement");
  }
  return row;
}

}  // namespace

Mat MeasurementSet::dc_design_full() const {
  Mat H(dc_rows_.size(), n_buses_);
  for (size_t r = 0; r < dc_rows_.size(); ++r)
    H.row(r) = dc_row(items_[dc_rows_[r]], Bx_, bfrom_, bto_, bx_).transpose();
  return H;
}

Mat MeasurementSet::dc_design_reduced(int ref) const {
  if (ref < 0 || ref >= n_buses_) fail_invalid("reference bus out of range");
  Mat Hf = dc_design_full();
  Mat H(Hf.rows(), n_buses_ - 1);
  for (int j = 0, cj = 0; j < n_buses_; ++j) {
    if (j == ref) continue;
    H.col(cj++) = Hf.col(j);
  }
  for (Eigen::Index r = 0; r < H.rows(); ++r)
    H.row(r) /= items_[dc_rows_[r]].sigma;
  return H;
}

Vec MeasurementSet::dc_values_whitened() const {
  Vec z(dc_rows_.size());
  for (size_t r = 0; r < dc_rows_.size(); ++r)
    z[r] = items_[dc_rows_[r]].value / items_[dc_rows_[r]].sigma;
  return z;
}

std::vector<int> MeasurementSet::qv_rows() const {
  std::vector<int> rows;
  for (int i = 0; i < size(); ++i) {
    MeasKind k = items_[i].kind;
    if (k == MeasKind::Vmag || k == MeasKind::Qinj || k == MeasKind::Qflow)
      rows.push_back(i);
  }
  return rows;
}

Mat MeasurementSet::qv_design_full() const {
  // linear part of the decoupled Q-V model; constants are irrelevant for
  // observability
  std::vector<int> rows = qv_rows();
  Mat H = Mat::Zero(rows.size(), n_buses_);
  for (size_t r = 0; r < rows.size(); ++r) {
    const Measurement& m = items_[rows[r]];
    switch (m.kind) {
      case MeasKind::Vmag:
        H(r, m.bus) = 1.0;
        break;
      case MeasKind::Qinj:
        H.row(r) = Bx_.row(m.bus);
        break;
      case MeasKind::Qflow: {
        const int f = bfrom_[m.branch], t = bto_[m.branch];
        const double w = 1.0 / bx_[m.branch];
        const int a = m.from_side ? f : t;
        const int b = m.from_side ? t : f;
        H(r, a) = w;
        H(r, b) = -w;
        break;
      }
      default:
        break;
    }
  }
  return H;
}

std::vector<Measurement> measurements_from_json(const GridCase& c,
                                                const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail_parse("malformed JSON in measurement file");
  if (!j.is_array()) fail_parse("measurement file: expected a JSON array");
  std::vector<Measurement> out;
  for (const json& mj : j) {
    if (!mj.is_object()) fail_parse("measurement: expected object");
    if (!mj.contains("kind")) fail_parse("measurement: missing key \"kind\"");
    Measurement m;
    m.kind = meas_kind_from_name(mj.at("kind").get<std::string>());
    for (auto it = mj.begin(); it != mj.end(); ++it) {
      const std::string& k = it.key();
      if (k != "kind" && k != "bus" && k != "from" && k != "to" && k != "value" &&
          k != "sigma")
        fail_parse("measurement: unknown key \"" + k + "\"");
    }
    if (is_branch_kind(m.kind)) {
      if (!mj.contains("from") || !mj.contains("to"))
        fail_parse("branch measurement needs \"from\" and \"to\"");
      int f = c.bus_index(mj.at("from").get<int>());
      int t = c.bus_index(mj.at("to").get<int>());
      m.branch = -1;
      for (int l = 0; l < c.n_branches(); ++l) {
        if (c.from_index(l) == f && c.to_index(l) == t) {
          m.branch = l;
          m.from_side = true;
          break;
        }
        if (c.from_index(l) == t && c.to_index(l) == f) {
          m.branch = l;
          m.from_side = false;
          break;
        }
      }
      if (m.branch < 0) fail_invalid("measurement references unknown branch");
    } else {
      if (!mj.contains("bus")) fail_parse("bus measurement needs \"bus\"");
      m.bus = c.bus_index(mj.at("bus").get<int>());
    }
    m.value = mj.value("value", 0.0);
    m.sigma = mj.value("sigma", 1.0);
    out.push_back(m);
  }
  return out;
}

std::string measurements_to_json(const GridCase& c,
                                 const std::vector<Measurement>& ms) {
  json arr = json::array();
  for (const Measurement& m : ms) {
    json mj;
    mj["kind"] = meas_kind_name(m.kind);
    if (is_branch_kind(m.kind)) {
      int f = c.from_index(m.branch), t = c.to_index(m.branch);
      if (!m.from_side) std::swap(f, t);
      mj["from"] = c.buses()[f].id;
      mj["to"] = c.buses()[t].id;
    } else {
      mj["bus"] = c.buses()[m.bus].id;
    }
    mj["value"] = m.value;
    mj["sigma"] = m.sigma;
    arr.push_back(mj);
  }
  return arr.dump(2);
}

Vec measure_exact(const GridCase& c, const ComplexState& state,
                  const std::vector<Measurement>& plan) {
  AdmittanceModel adm = build_admittance(c);
  PQ inj = ac_injections(adm, state, Coords::Polar);
  auto flows = branch_flows(adm, state);
  Vec z(plan.size());
  for (size_t i = 0; i < plan.size(); ++i) {
    const Measurement& m = plan[i];
    switch (m.kind) {
      case MeasKind::Vmag: z[i] = state.vm[m.bus]; break;
      case MeasKind::Pinj: z[i] = inj.p[m.bus]; break;
      case MeasKind::Qinj: z[i] = inj.q[m.bus]; break;
      case MeasKind::Pflow:
        z[i] = m.from_side ? flows[m.branch].s_from.real()
                           : flows[m.branch].s_to.real();
        break;
      case MeasKind::Qflow:
        z[i] = m.from_side ? flows[m.branch].s_from.imag()
                           : flows[m.branch].s_to.imag();
        break;
      case MeasKind::PhasorV: z[i] = state.va[m.bus]; break;
      case MeasKind::PhasorIline: {
        const int f = c.from_index(m.branch), t = c.to_index(m.branch);
        const double d = state.va[f] - state.va[t];
        z[i] = (m.from_side ? d : -d) / c.branches()[m.branch].x;
        break;
      }
    }
  }
  return z;
}

std::vector<Measurement> simulate_measurements(const GridCase& c,
                                               const ComplexState& true_state,
                                               std::vector<Measurement> plan,
                                               double noise_scale,
                                               unsigned seed) {
  Vec z = measure_exact(c, true_state, plan);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (size_t i = 0; i < plan.size(); ++i) {
    plan[i].value = z[i] + noise_scale * plan[i].sigma * gauss(rng);
  }
  return plan;
}

WlsResult wls_gauss_newton(const GridCase& c, const MeasurementSet& meas,
                           std::optional<ComplexState> init, double tol,
                           int max_iter) {
  const int n_bus = c.n_buses();
  const int ref = c.slack_index();
  const int n = 2 * n_bus - 1;  // theta at non-ref buses + V everywhere
  const int m = meas.size();
  if (m < n)
    fail_numeric("rank-deficient estimation: fewer measurements than states");

  AdmittanceModel adm = build_admittance(c);
  const Mat& G = adm.G;
  const Mat& B = adm.B;

  WlsResult res;
  res.state = init.value_or(ComplexState::flat(n_bus));
  res.state.va[ref] = 0.0;

  std::vector<int> theta_col(n_bus, -1);
  for (int i = 0, col = 0; i < n_bus; ++i)
    if (i != ref) theta_col[i] = col++;
  const int v_off = n_bus - 1;

  Vec z(m), w(m);
  for (int i = 0; i < m; ++i) {
    z[i] = meas.items()[i].value;
    w[i] = 1.0 / meas.items()[i].sigma;
  }

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    const Vec& vm = res.state.vm;
    const Vec& va = res.state.va;
    PQ inj = ac_injections(adm, res.state, Coords::Polar);

    Vec h(m);
    Mat J = Mat::Zero(m, n);
    for (int i = 0; i < m; ++i) {
      const Measurement& ms = meas.items()[i];
      switch (ms.kind) {
        case MeasKind::Vmag:
          h[i] = vm[ms.bus];
          J(i, v_off + ms.bus) = 1.0;
          break;
        case MeasKind::PhasorV:
          h[i] = va[ms.bus];
          if (theta_col[ms.bus] >= 0) J(i, theta_col[ms.bus]) = 1.0;
          break;
        case MeasKind::PhasorIline: {
          const int f = c.from_index(ms.branch), t = c.to_index(ms.branch);
          const double w_x = 1.0 / c.branches()[ms.branch].x;
          const double s = ms.from_side ? 1.0 : -1.0;
          h[i] = s * (va[f] - va[t]) * w_x;
          if (theta_col[f] >= 0) J(i, theta_col[f]) += s * w_x;
          if (theta_col[t] >= 0) J(i, theta_col[t]) -= s * w_x;
          break;
        }
        case MeasKind::Pinj:
        case MeasKind::Qinj: {
          const int mb = ms.bus;
          const bool is_p = ms.kind == MeasKind::Pinj;
          h[i] = is_p ? inj.p[mb] : inj.q[mb];
          for (int k = 0; k < n_bus; ++k) {
            const double th = va[mb] - va[k];
            const double ct = std::cos(th), st = std::sin(th);
            double dth, dv;
            if (k == mb) {
              if (is_p) {
                dth = -inj.q[mb] - B(mb, mb) * vm[mb] * vm[mb];
                dv = inj.p[mb] / vm[mb] + G(mb, mb) * vm[mb];
              } else {
                dth = inj.p[mb] - G(mb, mb) * vm[mb] * vm[mb];
                dv = inj.q[mb] / vm[mb] - B(mb, mb) * vm[mb];
              }
            } else {
              if (G(mb, k) == 0.0 && B(mb, k) == 0.0) continue;
              if (is_p) {
                dth = vm[mb] * vm[k] * (G(mb, k) * st - B(mb, k) * ct);
                dv = vm[mb] * (G(mb, k) * ct + B(mb, k) * st);
              } else {
                dth = -vm[mb] * vm[k] * (G(mb, k) * ct + B(mb, k) * st);
                dv = vm[mb] * (G(mb, k) * st - B(mb, k) * ct);
              }
            }
            if (theta_col[k] >= 0) J(i, theta_col[k]) += dth;
            J(i, v_off + k) += dv;
          }
          break;
        }
        case MeasKind::Pflow:
        case MeasKind::Qflow: {
          const auto& tp = adm.two_port[ms.branch];
          // S_ab = conj(y_aa) Va^2 + conj(y_ab) Va Vb e^{j(ta-tb)}
          int a = tp.from, b = tp.to;
          Complex y_aa = tp.y_ff, y_ab = tp.y_ft;
          if (!ms.from_side) {
            a = tp.to;
            b = tp.from;
            y_aa = tp.y_tt;
            y_ab = tp.y_tf;
          }
          const double ga = y_aa.real(), ba = y_aa.imag();
          const double gb = y_ab.real(), bb = y_ab.imag();
          const double th = va[a] - va[b];
          const double ct = std::cos(th), st = std::sin(th);
          const bool is_p = ms.kind == MeasKind::Pflow;
          if (is_p) {
            h[i] = ga * vm[a] * vm[a] + vm[a] * vm[b] * (gb * ct + bb * st);
            const double dth = vm[a] * vm[b] * (-gb * st + bb * ct);
            if (theta_col[a] >= 0) J(i, theta_col[a]) += dth;
            if (theta_col[b] >= 0) J(i, theta_col[b]) -= dth;
            J(i, v_off + a) += 2.0 * ga * vm[a] + vm[b] * (gb * ct + bb * st);
            J(i, v_off + b) += vm[a] * (gb * ct + bb * st);
          } else {
            h[i] = -ba * vm[a] * vm[a] + vm[a] * vm[b] * (gb * st - bb * ct);
            const double dth = vm[a] * vm[b] * (gb * ct + bb * st);
            if (theta_col[a] >= 0) J(i, theta_col[a]) += dth;
            if (theta_col[b] >= 0) J(i, theta_col[b]) -= dth;
            J(i, v_off + a) += -2.0 * ba * vm[a] + vm[b] * (gb * st - bb * ct);
            J(i, v_off + b) += vm[a] * (gb * st - bb * ct);
          }
          break;
        }
      }
    }

    Vec r = (z - h).cwiseProduct(w);
    Mat Jw = w.asDiagonal() * J;
    Eigen::ColPivHouseholderQR<Mat> qr(Jw);
    qr.setThreshold(1e-8);
    if (qr.rank() < n)
      fail_numeric(
          "rank-deficient linearized system: measurement set unobservable");
    Vec step = qr.solve(r);
    if (!step.allFinite()) break;  // diverged

    for (int k = 0; k < n_bus; ++k) {
      if (theta_col[k] >= 0) res.state.va[k] += step[theta_col[k]];
      res.state.vm[k] += step[v_off + k];
    }
    if (step.cwiseAbs().maxCoeff() < tol) {
      res.converged = true;
      ++res.iterations;
      break;
    }
    if (res.state.vm.cwiseAbs().maxCoeff() > 1e3) break;  // diverged
  }

  Vec h_final = measure_exact(c, res.state, meas.items());
  res.residual = (z - h_final).cwiseProduct(w);
  res.objective = res.residual.squaredNorm();
  return res;
}

EstimationResult dc_linear_se(const Mat& H, const Vec& z) {
  if (H.rows() != z.size()) fail_invalid("H and z dimensions disagree");
  Eigen::ColPivHouseholderQR<Mat> qr(H);
  qr.setThreshold(1e-10);
  if (qr.rank() < H.cols()) fail_numeric("H is rank deficient");
  EstimationResult res;
  res.state = qr.solve(z);
  res.residual = z - H * res.state;
  res.objective = res.residual.squaredNorm();
  return res;
}

Mat residual_projector(const Mat& H) {
  // P = I - Q1 Q1' with Q1 the thin orthonormal basis of range(H)
  Eigen::HouseholderQR<Mat> qr(H);
  Mat Q = qr.householderQ() * Mat::Identity(H.rows(), H.cols());
  return Mat::Identity(H.rows(), H.rows()) - Q * Q.transpose();
}

BadDataResult bad_data_scan(const Mat& H, const Vec& z, double alpha,
                            double lnrt_threshold) {
  const int m = static_cast<int>(H.rows());
  const int n = static_cast<int>(H.cols());
  if (m != z.size()) fail_invalid("H and z dimensions disagree");
  {
    Eigen::ColPivHouseholderQR<Mat> qr(H);
    qr.setThreshold(1e-10);
    if (qr.rank() < n) fail_numeric("H is rank deficient");
  }

  BadDataResult out;
  std::vector<int> active(m);
  std::iota(active.begin(), active.end(), 0);

  bool first_round = true;
  while (true) {
    const int ma = static_cast<int>(active.size());
    Mat Ha(ma, n);
    Vec za(ma);
    for (int i = 0; i < ma; ++i) {
      Ha.row(i) = H.row(active[i]);
      za[i] = z[active[i]];
    }
    Mat P = residual_projector(Ha);
    Vec r = P * za;

    if (first_round) {
      out.chi2_stat = r.squaredNorm();
      const int dof = ma - n;
      if (dof > 0) {
        boost::math::chi_squared chi2(dof);
        out.chi2_threshold = boost::math::quantile(chi2, 1.0 - alpha);
        out.chi2_detected = out.chi2_stat > out.chi2_threshold;
      }
      first_round = false;
    }

    // largest normalized residual; criticals (P_ii ~ 0) are skipped since
    // their residual is identically zero. Scanning in index order keeps the
    // lower index on exact ties.
    int worst = -1;
    double worst_ratio = lnrt_threshold;
    for (int i = 0; i < ma; ++i) {
      if (P(i, i) < 1e-9) continue;
      const double ratio = std::abs(r[i]) / std::sqrt(P(i, i));
      if (ratio > worst_ratio) {
        worst = i;
        worst_ratio = ratio;
      }
    }
    if (worst < 0) break;

    // the removal must keep the system observable
    Mat Hr(ma - 1, n);
    for (int i = 0, ri = 0; i < ma; ++i)
      if (i != worst) Hr.row(ri++) = Ha.row(i);
    Eigen::ColPivHouseholderQR<Mat> qr(Hr);
    qr.setThreshold(1e-10);
    if (qr.rank() < n) {
      out.halted_on_rank = true;
      break;
    }
    out.removed.push_back(active[worst]);
    active.erase(active.begin() + worst);
  }

  Mat Ha(active.size(), n);
  Vec za(active.size());
  for (size_t i = 0; i < active.size(); ++i) {
    Ha.row(i) = H.row(active[i]);
    za[i] = z[active[i]];
  }
  out.clean = dc_linear_se(Ha, za);
  return out;
}

std::vector<int> critical_measurements(const Mat& H) {
  Eigen::ColPivHouseholderQR<Mat> qr(H);
  qr.setThreshold(1e-10);
  if (qr.rank() < H.cols()) fail_numeric("H is rank deficient");
  Mat P = residual_projector(H);
  std::vector<int> crit;
  for (int i = 0; i < H.rows(); ++i)
    if (P.col(i).cwiseAbs().maxCoeff() < 1e-9) crit.push_back(i);
  return crit;
}

ObservabilityResult observability_numerical(const Mat& H_full, const Mat& A) {
  const int n = static_cast<int>(A.cols());
  const int nl = static_cast<int>(A.rows());
  if (H_full.cols() != n) fail_invalid("H and A column counts disagree");

  Mat N;  // null-space basis of H
  if (H_full.rows() == 0) {
    N = Mat::Identity(n, n);
  } else {
    Eigen::JacobiSVD<Mat> svd(H_full, Eigen::ComputeFullV);
    const double smax = svd.singularValues().size()
                            ? svd.singularValues().maxCoeff()
                            : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > 1e-8 * std::max(smax, 1.0)) ++rank;
    N = svd.matrixV().rightCols(n - rank);
  }

  ObservabilityResult res;
  res.line_determined.assign(nl, 0);
  std::vector<std::pair<int, int>> det_edges;
  for (int l = 0; l < nl; ++l) {
    bool determined =
        N.cols() == 0 || (A.row(l) * N).cwiseAbs().maxCoeff() < 1e-8;
    res.line_determined[l] = determined;
    if (determined) {
      int f = -1, t = -1;
      for (int j = 0; j < n; ++j) {
        if (A(l, j) > 0.5) f = j;
        if (A(l, j) < -0.5) t = j;
      }
      if (f >= 0 && t >= 0) det_edges.emplace_back(f, t);
    }
  }
  res.island = connected_components(n, det_edges);
  res.observable =
      *std::max_element(res.island.begin(), res.island.end()) == 0;
  return res;
}

ObservabilityResult observability_topological(const GridCase& c,
                                              const std::vector<Measurement>& ms) {
  const int n = c.n_buses();
  const int nl = c.n_branches();

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };

  std::vector<char> in_forest(nl, 0);
  auto try_add = [&](int l) {
    int rf = find(c.from_index(l)), rt = find(c.to_index(l));
    if (rf == rt) return false;
    parent[rf] = rt;
    in_forest[l] = 1;
    return true;
  };

  std::vector<std::vector<int>> incident(n);
  for (int l = 0; l < nl; ++l) {
    incident[c.from_index(l)].push_back(l);
    incident[c.to_index(l)].push_back(l);
  }

  // flow and line-current measurements are tied to their own branch
  std::vector<int> injections;
  for (size_t i = 0; i < ms.size(); ++i) {
    const Measurement& m = ms[i];
    if (m.kind == MeasKind::Pflow || m.kind == MeasKind::PhasorIline)
      try_add(m.branch);
    else if (m.kind == MeasKind::Pinj)
      injections.push_back(m.bus);
  }
  // injections may claim any incident branch; forced single-candidate moves
  // first, then greedy passes until the forest stops growing
  std::vector<char> used(injections.size(), 0);
  bool progress = true;
  while (progress) {
    progress = false;
    for (int pass = 0; pass < 2; ++pass) {
      for (size_t i = 0; i < injections.size(); ++i) {
        if (used[i]) continue;
        std::vector<int> cands;
        for (int l : incident[injections[i]])
          if (find(c.from_index(l)) != find(c.to_index(l))) cands.push_back(l);
        if (cands.empty()) continue;
        if (pass == 0 && cands.size() > 1) continue;  // forced moves first
        try_add(cands.front());
        used[i] = 1;
        progress = true;
      }
    }
  }

  ObservabilityResult res;
  res.line_determined.assign(in_forest.begin(), in_forest.end());
  std::vector<std::pair<int, int>> edges;
  for (int l = 0; l < nl; ++l)
    if (in_forest[l]) edges.emplace_back(c.from_index(l), c.to_index(l));
  res.island = connected_components(n, edges);
  res.observable = *std::max_element(res.island.begin(), res.island.end()) == 0;
  return res;
}

EstimationResult fuse_prior(const Mat& H, const Vec& z, const Vec& prior_mean,
                            const Mat& prior_cov) {
  const int n = static_cast<int>(prior_mean.size());
  if (prior_cov.rows() != n || prior_cov.cols() != n)
    fail_invalid("prior covariance dimension mismatch");
  Eigen::LLT<Mat> llt(prior_cov);
  if (llt.info() != Eigen::Success)
    fail_invalid("prior covariance must be positive definite");

  EstimationResult res;
  if (H.rows() == 0) {
    res.state = prior_mean;
    res.residual = Vec();
    res.objective = 0.0;
    return res;
  }
  if (H.cols() != n) fail_invalid("H and prior dimensions disagree");
  Mat info = llt.solve(Mat::Identity(n, n));  // Sigma^{-1}
  Mat lhs = info + H.transpose() * H;
  Vec rhs = info * prior_mean + H.transpose() * z;
  res.state = lhs.ldlt().solve(rhs);
  res.residual = z - H * res.state;
  res.objective = res.residual.squaredNorm();
  return res;
}

AttackVector build_attack(const Mat& H, const Vec& c) {
  if (c.size() != H.cols()) fail_invalid("attack coefficient dimension mismatch");
  if (c.cwiseAbs().maxCoeff() == 0.0) fail_invalid("attack coefficients are zero");
  AttackVector av;
  av.c = c;
  av.a = H * c;
  av.support = (av.a.cwiseAbs().array() > 1e-12).count();
  return av;
}

}  // namespace gridkit
