#include "netmodel.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>
#include <set>

namespace gridkit {

using nlohmann::json;

GridCase::GridCase(std::vector<Bus> buses, std::vector<Branch> branches,
                   std::vector<Generator> generators, std::vector<Load> loads)
    : buses_(std::move(buses)),
      branches_(std::move(branches)),
      generators_(std::move(generators)),
      loads_(std::move(loads)) {
  for (int i = 0; i < static_cast<int>(buses_.size()); ++i) {
    if (!index_.emplace(buses_[i].id, i).second)
      fail_invalid("duplicate bus id " + std::to_string(buses_[i].id));
  }
  int slack_count = 0;
  for (int i = 0; i < n_buses(); ++i) {
    if (buses_[i].type == BusType::Slack) {
      slack_idx_ = i;
      ++slack_count;
    }
  }
  if (slack_count == 0) fail_invalid("missing slack bus");
  if (slack_count > 1) fail_invalid("multiple slack buses");

  from_idx_.reserve(branches_.size());
  to_idx_.reserve(branches_.size());
  for (const Branch& b : branches_) {
    auto fi = index_.find(b.from);
    auto ti = index_.find(b.to);
    if (fi == index_.end() || ti == index_.end())
      fail_invalid("dangling branch endpoint (" + std::to_string(b.from) +
                   "," + std::to_string(b.to) + ")");
    if (b.from == b.to)
      fail_invalid("branch endpoints coincide at bus " + std::to_string(b.from));
    if (!(b.x > 0.0))
      fail_invalid("nonpositive reactance on branch (" + std::to_string(b.from) +
                   "," + std::to_string(b.to) + ")");
    if (b.tap < 0.0)
      fail_invalid("negative tap ratio on branch (" + std::to_string(b.from) +
                   "," + std::to_string(b.to) + ")");
    from_idx_.push_back(fi->second);
    to_idx_.push_back(ti->second);
  }
  for (const Generator& g : generators_) {
    if (index_.find(g.bus) == index_.end())
      fail_invalid("generator references unknown bus " + std::to_string(g.bus));
    if (g.p_min > g.p_max)
      fail_invalid("generator p_min exceeds p_max at bus " + std::to_string(g.bus));
    if (g.cost.c2 < 0.0)
      fail_invalid("nonconvex generator cost at bus " + std::to_string(g.bus));
  }
  for (const Load& l : loads_) {
    if (index_.find(l.bus) == index_.end())
      fail_invalid("load references unknown bus " + std::to_string(l.bus));
  }
}

int GridCase::bus_index(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail_invalid("unknown bus id " + std::to_string(id));
  return it->second;
}

Vec GridCase::load_p() const {
  Vec p = Vec::Zero(n_buses());
  for (const Load& l : loads_) p[bus_index(l.bus)] += l.p;
  return p;
}

Vec GridCase::load_q() const {
  Vec q = Vec::Zero(n_buses());
  for (const Load& l : loads_) q[bus_index(l.bus)] += l.q;
  return q;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> required,
                const char* ctx) {
  if (!j.is_object()) fail_parse(std::string(ctx) + ": expected object");
  for (const char* k : required)
    if (!j.contains(k))
      fail_parse(std::string(ctx) + ": missing key \"" + k + "\"");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : required)
      if (it.key() == k) known = true;
    if (!known)
      fail_parse(std::string(ctx) + ": unknown key \"" + it.key() + "\"");
  }
}

double num(const json& j, const char* key, const char* ctx) {
  const json& v = j.at(key);
  if (!v.is_number())
    fail_parse(std::string(ctx) + ": key \"" + key + "\" must be a number");
  return v.get<double>();
}

int integer(const json& j, const char* key, const char* ctx) {
  const json& v = j.at(key);
  if (!v.is_number_integer())
    fail_parse(std::string(ctx) + ": key \"" + key + "\" must be an integer");
  return v.get<int>();
}

}  // namespace

GridCase parse_case(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail_parse("malformed JSON in case file");
  check_keys(j, {"version", "buses", "branches", "generators", "loads"}, "case");
  if (integer(j, "version", "case") != 1) fail_parse("case: unsupported version");

  std::vector<Bus> buses;
  for (const json& bj : j.at("buses")) {
    check_keys(bj, {"id", "type", "b_shunt", "v_min", "v_max"}, "bus");
    Bus b;
    b.id = integer(bj, "id", "bus");
    std::string t = bj.at("type").get<std::string>();
    if (t == "slack")
      b.type = BusType::Slack;
    else if (t == "PV")
      b.type = BusType::Pv;
    else if (t == "PQ")
      b.type = BusType::Pq;
    else
      fail_parse("bus " + std::to_string(b.id) + ": unknown type \"" + t + "\"");
    b.b_shunt = num(bj, "b_shunt", "bus");
    b.v_min = num(bj, "v_min", "bus");
    b.v_max = num(bj, "v_max", "bus");
    buses.push_back(b);
  }
  std::vector<Branch> branches;
  for (const json& bj : j.at("branches")) {
    check_keys(bj, {"from", "to", "r", "x", "b_c", "tap", "shift", "p_max", "s_max"},
               "branch");
    Branch b;
    b.from = integer(bj, "from", "branch");
    b.to = integer(bj, "to", "branch");
    b.r = num(bj, "r", "branch");
    b.x = num(bj, "x", "branch");
    b.b_c = num(bj, "b_c", "branch");
    b.tap = num(bj, "tap", "branch");
    if (b.tap == 0.0) b.tap = 1.0;  // file convention: 0 means no transformer
    b.shift = num(bj, "shift", "branch");
    b.p_max = num(bj, "p_max", "branch");
    b.s_max = num(bj, "s_max", "branch");
    branches.push_back(b);
  }
  std::vector<Generator> generators;
  for (const json& gj : j.at("generators")) {
    check_keys(gj, {"bus", "p_min", "p_max", "q_min", "q_max", "cost"}, "generator");
    Generator g;
    g.bus = integer(gj, "bus", "generator");
    g.p_min = num(gj, "p_min", "generator");
    g.p_max = num(gj, "p_max", "generator");
    g.q_min = num(gj, "q_min", "generator");
    g.q_max = num(gj, "q_max", "generator");
    const json& cj = gj.at("cost");
    check_keys(cj, {"c2", "c1", "c0"}, "generator cost");
    g.cost = {num(cj, "c2", "cost"), num(cj, "c1", "cost"), num(cj, "c0", "cost")};
    generators.push_back(g);
  }
  std::vector<Load> loads;
  for (const json& lj : j.at("loads")) {
    check_keys(lj, {"bus", "p", "q"}, "load");
    Load l;
    l.bus = integer(lj, "bus", "load");
    l.p = num(lj, "p", "load");
    l.q = num(lj, "q", "load");
    loads.push_back(l);
  }
  return GridCase(std::move(buses), std::move(branches), std::move(generators),
                  std::move(loads));
}

std::string case_to_json(const GridCase& c) {
  json j;
  j["version"] = 1;
  j["buses"] = json::array();
  for (const Bus& b : c.buses()) {
    const char* t = b.type == BusType::Slack ? "slack"
                    : b.type == BusType::Pv  ? "PV"
                                             : "PQ";
    j["buses"].push_back({{"id", b.id},
                          {"type", t},
                          {"b_shunt", b.b_shunt},
                          {"v_min", b.v_min},
                          {"v_max", b.v_max}});
  }
  j["branches"] = json::array();
  for (const Branch& b : c.branches()) {
    j["branches"].push_back({{"from", b.from},
                             {"to", b.to},
                             {"r", b.r},
                             {"x", b.x},
                             {"b_c", b.b_c},
                             {"tap", b.tap},
                             {"shift", b.shift},
                             {"p_max", b.p_max},
                             {"s_max", b.s_max}});
  }
  j["generators"] = json::array();
  for (const Generator& g : c.generators()) {
    j["generators"].push_back({{"bus", g.bus},
                               {"p_min", g.p_min},
                               {"p_max", g.p_max},
                               {"q_min", g.q_min},
                               {"q_max", g.q_max},
                               {"cost", {{"c2", g.cost.c2}, {"c1", g.cost.c1}, {"c0", g.cost.c0}}}});
  }
  j["loads"] = json::array();
  for (const Load& l : c.loads()) {
    j["loads"].push_back({{"bus", l.bus}, {"p", l.p}, {"q", l.q}});
  }
  return j.dump(2);
}

AdmittanceModel build_admittance(const GridCase& c) {
  const int n = c.n_buses();
  AdmittanceModel m;
  m.Y = CMat::Zero(n, n);
  m.two_port.reserve(c.n_branches());

  for (int l = 0; l < c.n_branches(); ++l) {
    const Branch& b = c.branches()[l];
    const int f = c.from_index(l), t = c.to_index(l);
    const Complex y = 1.0 / Complex(b.r, b.x);
    const Complex y_sh(0.0, b.b_c / 2.0);
    const Complex rho = std::polar(b.tap, b.shift);
    if (b.shift != 0.0) m.has_phase_shift = true;

    AdmittanceModel::TwoPort tp;
    tp.from = f;
    tp.to = t;
    tp.y_ff = (y + y_sh) / (b.tap * b.tap);
    tp.y_ft = -y / std::conj(rho);
    tp.y_tf = -y / rho;
    tp.y_tt = y + y_sh;
    m.two_port.push_back(tp);

    m.Y(f, f) += tp.y_ff;
    m.Y(f, t) += tp.y_ft;
    m.Y(t, f) += tp.y_tf;
    m.Y(t, t) += tp.y_tt;
  }
  for (int i = 0; i < n; ++i) m.Y(i, i) += Complex(0.0, c.buses()[i].b_shunt);

  m.G = m.Y.real();
  m.B = m.Y.imag();
  return m;
}

DcModel build_dc(const GridCase& c) {
  const int n = c.n_buses(), nl = c.n_branches();
  DcModel m;
  m.A = Mat::Zero(nl, n);
  m.D = Vec::Zero(nl);
  m.b_branch = Vec::Zero(nl);
  m.b_shunt = Vec::Zero(n);
  for (int l = 0; l < nl; ++l) {
    const Branch& b = c.branches()[l];
    m.A(l, c.from_index(l)) = 1.0;
    m.A(l, c.to_index(l)) = -1.0;
    m.D[l] = 1.0 / b.x;
    m.b_branch[l] = -1.0 / b.x;
    m.b_shunt[c.from_index(l)] += b.b_c / 2.0;
    m.b_shunt[c.to_index(l)] += b.b_c / 2.0;
  }
  for (int i = 0; i < n; ++i) m.b_shunt[i] += c.buses()[i].b_shunt;
  m.Bx = m.A.transpose() * m.D.asDiagonal() * m.A;
  return m;
}

ComplexState ComplexState::flat(int n) {
  ComplexState s;
  s.vm = Vec::Ones(n);
  s.va = Vec::Zero(n);
  return s;
}

ComplexState ComplexState::from_complex(const CVec& v) {
  ComplexState s;
  s.vm = v.cwiseAbs();
  s.va.resize(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) s.va[i] = std::arg(v[i]);
  return s;
}

ComplexState ComplexState::from_rect(const Vec& vr, const Vec& vi) {
  CVec v(vr.size());
  for (Eigen::Index i = 0; i < vr.size(); ++i) v[i] = Complex(vr[i], vi[i]);
  return from_complex(v);
}

CVec ComplexState::to_complex() const {
  CVec v(vm.size());
  for (Eigen::Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
  return v;
}

Vec ComplexState::rect_real() const {
  return vm.array() * va.array().cos();
}

Vec ComplexState::rect_imag() const {
  return vm.array() * va.array().sin();
}

PQ ac_injections(const AdmittanceModel& model, const ComplexState& state,
                 Coords coords) {
  const int n = static_cast<int>(model.Y.rows());
  if (state.size() != n) fail_invalid("state dimension mismatch");
  PQ out;
  out.p = Vec::Zero(n);
  out.q = Vec::Zero(n);
  if (coords == Coords::Polar) {
    for (int m = 0; m < n; ++m) {
      double pm = 0.0, qm = 0.0;
      for (int k = 0; k < n; ++k) {
        const double g = model.G(m, k), b = model.B(m, k);
        if (g == 0.0 && b == 0.0) continue;
        const double th = state.va[m] - state.va[k];
        const double vv = state.vm[m] * state.vm[k];
        pm += vv * (g * std::cos(th) + b * std::sin(th));
        qm += vv * (g * std::sin(th) - b * std::cos(th));
      }
      out.p[m] = pm;
      out.q[m] = qm;
    }
  } else {
    const Vec vr = state.rect_real(), vi = state.rect_imag();
    const Vec a = model.G * vr - model.B * vi;
    const Vec b = model.G * vi + model.B * vr;
    out.p = vr.cwiseProduct(a) + vi.cwiseProduct(b);
    out.q = vi.cwiseProduct(a) - vr.cwiseProduct(b);
  }
  return out;
}

std::vector<BranchFlow> branch_flows(const AdmittanceModel& model,
                                     const ComplexState& state) {
  if (state.size() != model.Y.rows()) fail_invalid("state dimension mismatch");
  const CVec v = state.to_complex();
  std::vector<BranchFlow> flows;
  flows.reserve(model.two_port.size());
  for (const auto& tp : model.two_port) {
    BranchFlow f;
    f.i_from = tp.y_ff * v[tp.from] + tp.y_ft * v[tp.to];
    f.i_to = tp.y_tf * v[tp.from] + tp.y_tt * v[tp.to];
    f.s_from = v[tp.from] * std::conj(f.i_from);
    f.s_to = v[tp.to] * std::conj(f.i_to);
    flows.push_back(f);
  }
  return flows;
}

PQ dc_injections(const DcModel& model, const Vec& theta, const Vec& v) {
  const int n = static_cast<int>(model.Bx.rows());
  if (theta.size() != n || v.size() != n) fail_invalid("vector dimension mismatch");
  PQ out;
  out.p = model.Bx * theta;
  out.q = model.Bx * v - model.b_shunt;
  return out;
}

std::vector<int> connected_components(
    int n_buses, const std::vector<std::pair<int, int>>& edges) {
  std::vector<int> parent(n_buses);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& [u, v] : edges) {
    int ru = find(u), rv = find(v);
    if (ru != rv) parent[ru] = rv;
  };
  std::vector<int> comp(n_buses, -1);
  int next = 0;
  for (int i = 0; i < n_buses; ++i) {
    int r = find(i);
    if (comp[r] == -1) comp[r] = next++;
    comp[i] = comp[r];
  }
  return comp;
}

}  // namespace gridkit
