#include "report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "commitment.hpp"
#include "dispatch.hpp"
#include "estimation.hpp"
#include "flexload.hpp"
#include "outage.hpp"
#include "powerflow.hpp"
#include "signals.hpp"

namespace gridkit::report {

using nlohmann::json;

namespace {

json parse_params(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail_parse("malformed JSON parameter document");
  if (!j.is_object()) fail_parse("parameter document must be a JSON object");
  return j;
}

Vec vec_from(const json& j, const char* key, int expect = -1) {
  if (!j.contains(key)) fail_parse(std::string("missing key \"") + key + "\"");
  const json& a = j.at(key);
  if (!a.is_array()) fail_parse(std::string("key \"") + key + "\" must be an array");
  Vec v(a.size());
  for (size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  if (expect >= 0 && v.size() != expect)
    fail_invalid(std::string("key \"") + key + "\" has the wrong length");
  return v;
}

// scalar-or-array convenience for per-period parameter vectors
Vec vec_or_const(const json& j, const char* key, int n) {
  if (!j.contains(key)) fail_parse(std::string("missing key \"") + key + "\"");
  const json& a = j.at(key);
  if (a.is_number()) return Vec::Constant(n, a.get<double>());
  Vec v = vec_from(j, key);
  if (v.size() != n)
    fail_invalid(std::string("key \"") + key + "\" has the wrong length");
  return v;
}

json to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i))));
  return rows;
}

CostFunction cost_from(const json& j) {
  if (j.contains("pwl")) {
    std::vector<std::pair<double, double>> pts;
    for (const json& p : j.at("pwl"))
      pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return CostFunction::piecewise_linear(std::move(pts));
  }
  return CostFunction::quadratic(j.value("c2", 0.0), j.value("c1", 0.0),
                                 j.value("c0", 0.0));
}

std::vector<GenSpec> gens_from(const json& j) {
  std::vector<GenSpec> gens;
  for (const json& g : j.at("generators")) {
    GenSpec spec;
    spec.p_min = g.at("p_min").get<double>();
    spec.p_max = g.at("p_max").get<double>();
    spec.cost = cost_from(g.at("cost"));
    gens.push_back(std::move(spec));
  }
  return gens;
}

std::optional<WindSpec> wind_from(const json& j) {
  if (!j.contains("wind")) return std::nullopt;
  const json& w = j.at("wind");
  WindSpec spec;
  if (w.contains("forecast")) spec.forecast = w.at("forecast").get<double>();
  if (w.contains("weibull")) {
    spec.weibull = {w.at("weibull").at("shape").get<double>(),
                    w.at("weibull").at("scale").get<double>()};
  }
  spec.epsilon = w.value("epsilon", 0.99);
  return spec;
}

// expands a reduced angle estimate back to bus order with theta[ref] = 0
Vec expand_reduced(const Vec& reduced, int n, int ref) {
  Vec full = Vec::Zero(n);
  for (int i = 0, r = 0; i < n; ++i)
    if (i != ref) full[i] = reduced[r++];
  return full;
}

int ref_index(const GridCase& c, const json& j) {
  return j.contains("ref") ? c.bus_index(j.at("ref").get<int>())
                           : c.slack_index();
}

json islands_json(const ObservabilityResult& r) {
  json o;
  o["observable"] = r.observable;
  o["islands"] = json::array();
  for (int isl : r.island) o["islands"].push_back(isl);
  return o;
}

json bus_ids(const GridCase& c) {
  json ids = json::array();
  for (const Bus& b : c.buses()) ids.push_back(b.id);
  return ids;
}

}  // namespace

std::string case_summary(const GridCase& c) {
  DcModel dc = build_dc(c);
  std::vector<std::pair<int, int>> edges;
  for (int l = 0; l < c.n_branches(); ++l)
    edges.emplace_back(c.from_index(l), c.to_index(l));
  auto comp = connected_components(c.n_buses(), edges);
  json out;
  out["buses"] = c.n_buses();
  out["branches"] = c.n_branches();
  out["generators"] = c.generators().size();
  out["loads"] = c.loads().size();
  out["slack_bus"] = c.buses()[c.slack_index()].id;
  out["connected"] = *std::max_element(comp.begin(), comp.end()) == 0;
  out["total_load_p"] = c.load_p().sum();
  return out.dump();
}

std::string pf_dc(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  DcModel dc = build_dc(c);
  Vec p = vec_from(j, "injections", c.n_buses());
  const int ref = ref_index(c, j);
  Vec theta = solve_dc(dc, p, ref);
  json out;
  out["theta"] = to_json(theta);
  out["bus_ids"] = bus_ids(c);
  out["ref"] = c.buses()[ref].id;
  out["residual"] = (dc.Bx * theta - p).cwiseAbs().maxCoeff();
  return out.dump();
}

std::string pf_ac(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  const json& sj = j.at("spec");
  PfSpec spec;
  spec.slack_bus = c.bus_index(sj.at("slack").at("bus").get<int>());
  spec.slack_v = sj.at("slack").value("v", 1.0);
  for (const json& b : sj.value("pv", json::array()))
    spec.pv.push_back({c.bus_index(b.at("bus").get<int>()),
                       b.at("p").get<double>(), b.at("v").get<double>()});
  for (const json& b : sj.value("pq", json::array()))
    spec.pq.push_back({c.bus_index(b.at("bus").get<int>()),
                       b.at("p").get<double>(), b.at("q").get<double>()});
  PfOptions opt;
  opt.tol = j.value("tol", 1e-8);
  opt.max_iter = j.value("max_iter", 20);
  PfSolution sol = solve_ac(c, spec, opt);
  json out;
  out["converged"] = sol.converged;
  out["iterations"] = sol.iterations;
  out["mismatch"] = sol.mismatch;
  out["vm"] = to_json(sol.state.vm);
  out["va"] = to_json(sol.state.va);
  out["bus_ids"] = bus_ids(c);
  out["q_violations"] = json::array();
  for (int b : sol.q_violations) out["q_violations"].push_back(c.buses()[b].id);
  return out.dump();
}

std::string se_run(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  auto meas = measurements_from_json(c, j.at("measurements").dump());
  MeasurementSet ms(c, meas);
  const std::string mode = j.value("mode", "dc");
  json out;
  out["bus_ids"] = bus_ids(c);
  if (mode == "dc") {
    const int ref = ref_index(c, j);
    Mat H = ms.dc_design_reduced(ref);
    Vec z = ms.dc_values_whitened();
    EstimationResult r = dc_linear_se(H, z);
    out["theta"] = to_json(expand_reduced(r.state, c.n_buses(), ref));
    out["residual"] = to_json(r.residual);
    out["objective"] = r.objective;
    out["converged"] = true;
    out["iterations"] = 1;
  } else if (mode == "ac") {
    WlsResult r = wls_gauss_newton(c, ms, std::nullopt, j.value("tol", 1e-8),
                                   j.value("max_iter", 25));
    out["vm"] = to_json(r.state.vm);
    out["va"] = to_json(r.state.va);
    out["residual"] = to_json(r.residual);
    out["objective"] = r.objective;
    out["converged"] = r.converged;
    out["iterations"] = r.iterations;
  } else {
    fail_parse("se mode must be \"dc\" or \"ac\"");
  }
  return out.dump();
}

std::string se_baddata(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  auto meas = measurements_from_json(c, j.at("measurements").dump());
  MeasurementSet ms(c, meas);
  const int ref = ref_index(c, j);
  Mat H = ms.dc_design_reduced(ref);
  Vec z = ms.dc_values_whitened();
  BadDataResult r =
      bad_data_scan(H, z, j.value("alpha", 0.01), j.value("lnrt", 3.0));
  json out;
  out["chi2_detected"] = r.chi2_detected;
  out["chi2_stat"] = r.chi2_stat;
  out["chi2_threshold"] = r.chi2_threshold;
  out["removed"] = json::array();
  // dc-row positions are mapped back to measurement-file indices
  for (int i : r.removed) out["removed"].push_back(ms.dc_rows()[i]);
  out["halted_on_rank"] = r.halted_on_rank;
  out["theta"] = to_json(expand_reduced(r.clean.state, c.n_buses(), ref));
  out["objective"] = r.clean.objective;
  json crit = json::array();
  for (int i : critical_measurements(H)) crit.push_back(ms.dc_rows()[i]);
  out["critical"] = crit;
  return out.dump();
}

std::string se_observe(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  auto meas = measurements_from_json(c, j.at("measurements").dump());
  MeasurementSet ms(c, meas);
  DcModel dc = build_dc(c);
  const std::string method = j.value("method", "both");
  json out;
  ObservabilityResult num, topo;
  if (method == "numerical" || method == "both") {
    num = observability_numerical(ms.dc_design_full(), dc.A);
    out["numerical"] = islands_json(num);
  }
  if (method == "topological" || method == "both") {
    topo = observability_topological(c, meas);
    out["topological"] = islands_json(topo);
  }
  if (method == "both") {
    auto norm = [](std::vector<int> p) {
      std::vector<int> map(p.size(), -1);
      int next = 0;
      for (int& x : p) {
        if (map[x] == -1) map[x] = next++;
        x = map[x];
      }
      return p;
    };
    out["agree"] = norm(num.island) == norm(topo.island);
  }
  return out.dump();
}

std::string se_attack(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  auto meas = measurements_from_json(c, j.at("measurements").dump());
  MeasurementSet ms(c, meas);
  const int ref = ref_index(c, j);
  Mat H = ms.dc_design_reduced(ref);

  // target state bias, given per bus with the reference pinned at zero
  Vec c_full = Vec::Zero(c.n_buses());
  for (const json& s : j.at("target"))
    c_full[c.bus_index(s.at("bus").get<int>())] = s.at("shift").get<double>();
  Vec cvec(c.n_buses() - 1);
  for (int i = 0, r = 0; i < c.n_buses(); ++i)
    if (i != ref) cvec[r++] = c_full[i];

  AttackVector av = build_attack(H, cvec);
  Mat P = residual_projector(H);

  json out;
  out["support"] = av.support;
  out["attack_whitened"] = to_json(av.a);
  out["residual_change"] = (P * av.a).cwiseAbs().maxCoeff();

  // when the file carries readings, demonstrate the stealth end to end
  Vec z = ms.dc_values_whitened();
  if (z.cwiseAbs().maxCoeff() > 0.0) {
    const double alpha = j.value("alpha", 0.01);
    const double lnrt = j.value("lnrt", 3.0);
    BadDataResult before = bad_data_scan(H, z, alpha, lnrt);
    BadDataResult after = bad_data_scan(H, z + av.a, alpha, lnrt);
    out["detected_before"] = before.chi2_detected;
    out["detected_after"] = after.chi2_detected;
    out["achieved_shift"] = to_json(expand_reduced(
        Vec(after.clean.state - before.clean.state), c.n_buses(), ref));
  }
  return out.dump();
}

std::string outage_identify(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  DcModel dc = build_dc(c);
  Vec pre = vec_from(j, "theta_pre", c.n_buses());
  Vec post = vec_from(j, "theta_post", c.n_buses());
  const int ref = ref_index(c, j);
  std::vector<int> internal;
  if (j.contains("internal")) {
    for (const json& b : j.at("internal"))
      internal.push_back(c.bus_index(b.get<int>()));
  } else {
    for (int i = 0; i < c.n_buses(); ++i) internal.push_back(i);
  }
  OutageModel model = build_outage_model(dc, pre, post, internal, ref);

  // optional synthetic observation noise, reproducible by seed
  if (j.contains("noise_db")) {
    const double snr = j.at("noise_db").get<double>();
    std::mt19937_64 rng(j.value("seed", 0u));
    std::normal_distribution<double> g;
    const double sigma =
        model.observation.norm() * std::pow(10.0, -snr / 20.0) /
        std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, model.observation.size())));
    for (int r = 0; r < model.observation.size(); ++r)
      model.observation[r] += sigma * g(rng);
  }

  const std::string method = j.value("method", "omp");
  const int k = j.value("k", 1);
  OutageEstimate est;
  if (method == "exhaustive")
    est = identify_exhaustive(model, k);
  else if (method == "omp")
    est = identify_omp(model, k, j.value("residual_threshold", 0.0));
  else
    fail_parse("outage method must be \"omp\" or \"exhaustive\"");

  json out;
  out["lines"] = json::array();
  for (int l : est.lines) {
    out["lines"].push_back({{"index", l},
                            {"from", c.buses()[c.from_index(l)].id},
                            {"to", c.buses()[c.to_index(l)].id}});
  }
  out["m_hat"] = to_json(est.m_hat);
  out["residual"] = est.residual;
  return out.dump();
}

std::string signal_phasor(const std::string& params) {
  json j = parse_params(params);
  WaveRecord rec;
  rec.samples = vec_from(j, "samples");
  rec.fs = j.at("fs").get<double>();
  rec.f0 = j.at("f0").get<double>();
  const int start = j.value("start", 0);
  int count = 0;
  if (j.contains("count")) {
    count = j.at("count").get<int>();
  } else {
    const double cycles = j.value("cycles", 1.0);
    count = static_cast<int>(std::lround(cycles * rec.fs / rec.f0));
  }
  Complex ph = estimate_phasor(rec, start, count);
  json out;
  out["re"] = ph.real();
  out["im"] = ph.imag();
  out["magnitude"] = std::abs(ph);
  out["phase"] = std::arg(ph);
  return out.dump();
}

std::string signal_modes(const std::string& params) {
  json j = parse_params(params);
  Vec samples = vec_from(j, "samples");
  ModeSet modes = prony_modes(samples, j.at("fs").get<double>(),
                              j.at("order").get<int>());
  json out;
  out["modes"] = json::array();
  for (const Mode& m : modes.modes) {
    out["modes"].push_back({{"frequency", m.frequency},
                            {"decay", m.decay},
                            {"amplitude", m.amplitude},
                            {"phase", m.phase}});
  }
  return out.dump();
}

std::string ed(const std::string& params) {
  json j = parse_params(params);
  std::vector<GenSpec> gens = gens_from(j);
  const double load = j.at("load").get<double>();
  auto wind = wind_from(j);
  const std::string mode = j.value("mode", "forecast");

  DispatchSolution sol;
  if (mode == "chance") {
    if (!wind) fail_parse("chance mode needs a wind block");
    sol = chance_ed(gens, load, *wind);
  } else if (mode == "forecast") {
    sol = economic_dispatch(
        gens, load, wind && wind->forecast ? wind->forecast : std::nullopt);
  } else {
    fail_parse("ed mode must be \"forecast\" or \"chance\"");
  }
  json out;
  out["dispatch"] = to_json(sol.p_gen);
  out["lambda"] = sol.lambda;
  out["objective"] = sol.objective;
  out["binding"] = sol.binding_gens;
  return out.dump();
}

std::string opf(const GridCase& c, const std::string& params) {
  json j = parse_params(params);
  DispatchSolution sol = dc_opf(c, j.value("penalty", 0.0));
  json out;
  out["dispatch"] = to_json(sol.p_gen);
  out["lmps"] = to_json(sol.lmp);
  out["bus_ids"] = bus_ids(c);
  out["theta"] = to_json(sol.theta);
  out["objective"] = sol.objective;
  json binding;
  binding["generators"] = sol.binding_gens;
  binding["lines"] = json::array();
  for (int l : sol.binding_lines) {
    binding["lines"].push_back({{"index", l},
                                {"from", c.buses()[c.from_index(l)].id},
                                {"to", c.buses()[c.to_index(l)].id}});
  }
  out["binding"] = binding;
  return out.dump();
}

std::string uc(const std::string& params) {
  json j = parse_params(params);
  UcInstance inst;
  inst.periods = j.at("periods").get<int>();
  inst.demand = vec_from(j, "demand", inst.periods);
  for (const json& uj : j.at("units")) {
    UcUnit u;
    u.p_min = uj.at("p_min").get<double>();
    u.p_max = uj.at("p_max").get<double>();
    u.cost = cost_from(uj.at("cost"));
    u.startup = uj.value("startup", 0.0);
    u.ramp_up = uj.value("ramp_up", kInf);
    u.ramp_down = uj.value("ramp_down", kInf);
    u.min_up = uj.value("min_up", 1);
    u.min_down = uj.value("min_down", 1);
    u.init_on = uj.value("init_on", false);
    u.init_power = uj.value("init_power", 0.0);
    inst.units.push_back(u);
  }
  const std::string method = j.value("method", "lagrangian");
  UcSchedule s;
  if (method == "bruteforce") {
    s = uc_bruteforce(inst);
  } else if (method == "lagrangian") {
    UcOptions opt;
    opt.subgradient.iterations = j.value("iterations", 500);
    opt.power_grid_levels = j.value("levels", 21);
    s = uc_lagrangian(inst, opt);
  } else {
    fail_parse("uc method must be \"lagrangian\" or \"bruteforce\"");
  }
  json out;
  out["on"] = json::array();
  for (const auto& row : s.on) {
    json r = json::array();
    for (char v : row) r.push_back(static_cast<int>(v));
    out["on"].push_back(r);
  }
  out["power"] = to_json(s.power);
  out["primal"] = s.cost;
  out["dual"] = s.dual_bound;
  out["gap"] = s.gap;
  return out.dump();
}

std::string dr(const std::string& params) {
  json j = parse_params(params);
  DrInstance inst;
  inst.periods = j.at("periods").get<int>();
  const json& cost = j.at("lse_cost");
  inst.lse_c2 = vec_or_const(cost, "c2", inst.periods);
  inst.lse_c1 = vec_or_const(cost, "c1", inst.periods);
  inst.s_min = j.value("s_min", 0.0);
  inst.s_max = j.value("s_max", kInf);
  for (const json& uj : j.at("users")) {
    DrUser user;
    for (const json& aj : uj.at("appliances")) {
      Appliance a;
      a.u1 = vec_or_const(aj, "u1", inst.periods);
      a.u2 = vec_or_const(aj, "u2", inst.periods);
      a.p_min = vec_or_const(aj, "p_min", inst.periods);
      a.p_max = vec_or_const(aj, "p_max", inst.periods);
      if (aj.contains("energy")) {
        const json& e = aj.at("energy");
        const std::string kind = e.at("kind").get<std::string>();
        if (kind == "eq")
          a.energy_kind = Appliance::Energy::Equal;
        else if (kind == "max")
          a.energy_kind = Appliance::Energy::AtMost;
        else
          fail_parse("appliance energy kind must be \"eq\" or \"max\"");
        a.energy = e.at("value").get<double>();
      }
      user.appliances.push_back(std::move(a));
    }
    inst.users.push_back(std::move(user));
  }

  const std::string mode = j.value("mode", "central");
  DrOptions opt;
  opt.iterations = j.value("iterations", opt.iterations);
  DrResult r = dr_solve(inst, mode == "dual" ? DrMode::Dual : DrMode::Central, opt);

  json out;
  out["supply"] = to_json(r.supply);
  out["prices"] = to_json(r.prices);
  out["welfare"] = r.welfare;
  out["objective"] = r.objective;
  out["gap"] = r.gap;
  out["iterations"] = r.iterations;
  out["converged"] = r.converged;
  out["schedules"] = json::array();
  for (const auto& user : r.schedules) {
    json us = json::array();
    for (const Vec& p : user) us.push_back(to_json(p));
    out["schedules"].push_back(us);
  }
  return out.dump();
}

std::string pev(const std::string& params) {
  json j = parse_params(params);
  PevFleet fleet;
  fleet.base_demand = vec_from(j, "base_demand");
  const int T = static_cast<int>(fleet.base_demand.size());
  for (const json& vj : j.at("vehicles")) {
    PevFleet::Vehicle v;
    v.r_min = vec_or_const(vj, "r_min", T);
    v.r_max = vec_or_const(vj, "r_max", T);
    v.energy = vj.at("energy").get<double>();
    fleet.vehicles.push_back(std::move(v));
  }
  const std::string mode = j.value("mode", "central");
  ChargingProfiles p;
  if (mode == "distributed")
    p = pev_distributed(fleet, j.value("iters", 500), j.value("tol", 1e-6));
  else if (mode == "central")
    p = pev_central(fleet);
  else
    fail_parse("pev mode must be \"central\" or \"distributed\"");

  json out;
  out["rates"] = to_json(p.rates);
  out["aggregate"] = to_json(p.aggregate);
  out["objective_trace"] = to_json(p.objective_trace);
  out["price_trace"] = to_json(p.price_trace);
  out["iterations"] = p.iterations;
  out["converged"] = p.converged;
  return out.dump();
}

}  // namespace gridkit::report
