// gridkit command line: every pipeline of the shared library behind one
// executable. Reads JSON/CSV inputs, writes a JSON run report and per-command
// CSV tables. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gridkit/gridkit.h"

using nlohmann::json;

namespace {

struct CliError {
  int code;
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError{1, "cannot open file: " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw CliError{1, "cannot write file: " + path};
  out << text;
}

std::string fnv1a_digest(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

// one run = inputs, a library call, a report envelope and optional CSVs
class Run {
 public:
  explicit Run(std::string command) : command_(std::move(command)) {
    start_ = std::chrono::steady_clock::now();
  }

  std::string load(const std::string& label, const std::string& path) {
    std::string text = read_file(path);
    inputs_[label] = fnv1a_digest(text);
    return text;
  }

  gk_case* parse_case(const std::string& path) {
    std::string text = load("case", path);
    gk_case* c = nullptr;
    if (gk_case_parse(text.c_str(), &c) != GK_OK)
      throw CliError{1, gk_last_error()};
    return c;
  }

  json call(gk_status (*fn)(const gk_case*, const char*, char**),
            const gk_case* c, const json& params) {
    char* out = nullptr;
    if (fn(c, params.dump().c_str(), &out) != GK_OK)
      throw CliError{1, gk_last_error()};
    json result = json::parse(out);
    gk_string_free(out);
    return result;
  }

  json call(gk_status (*fn)(const char*, char**), const json& params) {
    char* out = nullptr;
    if (fn(params.dump().c_str(), &out) != GK_OK)
      throw CliError{1, gk_last_error()};
    json result = json::parse(out);
    gk_string_free(out);
    return result;
  }

  void finish(const json& result, const std::string& report_path) {
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start_);
    json report;
    report["version"] = 1;
    report["command"] = command_;
    report["inputs"] = inputs_;
    report["elapsed_ms"] = elapsed.count();
    report["result"] = result;
    if (report_path.empty())
      std::cout << report.dump(2) << "\n";
    else
      write_file(report_path, report.dump(2));
  }

 private:
  std::string command_;
  std::map<std::string, std::string> inputs_;
  std::chrono::steady_clock::time_point start_;
};

struct CaseGuard {
  gk_case* c = nullptr;
  ~CaseGuard() { gk_case_free(c); }
};

// time,value rows with a header; the sample rate comes from the time column
std::pair<json, double> read_wave_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw CliError{1, "empty waveform file"};
  json samples = json::array();
  std::vector<double> times;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw CliError{1, "waveform rows must be time,value"};
    times.push_back(std::stod(line.substr(0, comma)));
    samples.push_back(std::stod(line.substr(comma + 1)));
  }
  if (times.size() < 2) throw CliError{1, "waveform needs at least two samples"};
  const double fs = 1.0 / (times[1] - times[0]);
  return {samples, fs};
}

std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridkit: power grid monitoring and optimization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string report_path;
  app.add_option("--report", report_path,
                 "write the JSON run report to this path (default: stdout)")
      ->capture_default_str();

  // ---- case ----------------------------------------------------------
  auto* case_cmd = app.add_subcommand("case", "case file utilities");
  case_cmd->require_subcommand(1);
  auto* case_validate =
      case_cmd->add_subcommand("validate", "parse and validate a case file");
  std::string cv_case;
  case_validate->add_option("--case", cv_case, "case JSON file")->required();

  // ---- pf ------------------------------------------------------------
  auto* pf = app.add_subcommand("pf", "power flow solvers");
  pf->require_subcommand(1);
  auto* pf_dc = pf->add_subcommand("dc", "linear DC power flow");
  std::string pfdc_case, pfdc_inj, pfdc_out = "theta.csv";
  int pfdc_ref = -1;
  pf_dc->add_option("--case", pfdc_case, "case JSON file")->required();
  pf_dc->add_option("--injections", pfdc_inj,
                    "injection JSON file {\"version\":1,\"p\":[...]}")
      ->required();
  pf_dc->add_option("--ref", pfdc_ref, "reference bus id (default: slack)");
  pf_dc->add_option("--out", pfdc_out, "angle CSV output path")
      ->capture_default_str();

  auto* pf_ac = pf->add_subcommand("ac", "Newton AC power flow");
  std::string pfac_case, pfac_spec, pfac_out;
  double pfac_tol = 1e-8;
  int pfac_iter = 20;
  pf_ac->add_option("--case", pfac_case, "case JSON file")->required();
  pf_ac->add_option("--spec", pfac_spec, "bus classification JSON file")
      ->required();
  pf_ac->add_option("--tol", pfac_tol, "mismatch tolerance")
      ->capture_default_str();
  pf_ac->add_option("--max-iter", pfac_iter, "Newton iteration budget")
      ->capture_default_str();
  pf_ac->add_option("--out", pfac_out, "state CSV output path");

  // ---- se ------------------------------------------------------------
  auto* se = app.add_subcommand("se", "state estimation and data integrity");
  se->require_subcommand(1);
  std::string se_case, se_meas, se_mode = "dc";
  int se_ref = -1;
  auto add_se_common = [&](CLI::App* sub) {
    sub->add_option("--case", se_case, "case JSON file")->required();
    sub->add_option("--meas", se_meas, "measurement JSON file")->required();
    sub->add_option("--ref", se_ref, "reference bus id (default: slack)");
  };
  auto* se_run = se->add_subcommand("run", "weighted least-squares estimate");
  add_se_common(se_run);
  se_run->add_option("--mode", se_mode, "dc or ac")->capture_default_str();
  double serun_tol = 1e-8;
  int serun_iter = 25;
  se_run->add_option("--tol", serun_tol, "Gauss-Newton step tolerance")
      ->capture_default_str();
  se_run->add_option("--max-iter", serun_iter, "Gauss-Newton iteration budget")
      ->capture_default_str();

  auto* se_bad = se->add_subcommand("baddata", "chi-square and LNRT cleansing");
  add_se_common(se_bad);
  double bad_lnrt = 3.0, bad_alpha = 0.01;
  se_bad->add_option("--lnrt", bad_lnrt, "normalized residual threshold")
      ->capture_default_str();
  se_bad->add_option("--alpha", bad_alpha, "chi-square false alarm level")
      ->capture_default_str();

  auto* se_obs = se->add_subcommand("observe", "observability analysis");
  add_se_common(se_obs);
  std::string obs_method = "both";
  se_obs->add_option("--method", obs_method, "numerical, topological or both")
      ->capture_default_str();

  auto* se_atk = se->add_subcommand("attack", "undetectable attack construction");
  add_se_common(se_atk);
  std::string atk_target;
  se_atk
      ->add_option("--target", atk_target,
                   "JSON file [{\"bus\":id,\"shift\":rad}, ...]")
      ->required();

  // ---- outage --------------------------------------------------------
  auto* outage = app.add_subcommand("outage", "line outage identification");
  outage->require_subcommand(1);
  std::string out_case, out_pre, out_post, out_internal;
  int out_k = 1, out_ref = -1;
  double out_noise_db = 0.0;
  unsigned out_seed = 0;
  bool out_has_noise = false;
  auto add_outage_common = [&](CLI::App* sub) {
    sub->add_option("--case", out_case, "case JSON file")->required();
    sub->add_option("--pre", out_pre, "pre-event angle JSON file")->required();
    sub->add_option("--post", out_post, "post-event angle JSON file")
        ->required();
    sub->add_option("--k", out_k, "number of outaged lines sought")
        ->capture_default_str();
    sub->add_option("--internal", out_internal,
                    "internal bus ids, comma separated (default: all)");
    sub->add_option("--ref", out_ref, "reference bus id (default: slack)");
    sub->add_flag_callback("--with-noise", [&] { out_has_noise = true; },
                           "inject synthetic observation noise");
    sub->add_option("--noise-db", out_noise_db,
                    "signal-to-noise ratio in dB for --with-noise")
        ->capture_default_str();
    sub->add_option("--seed", out_seed, "noise seed (bit-reproducible)")
        ->capture_default_str();
  };
  auto* outage_omp = outage->add_subcommand("omp", "greedy sparse recovery");
  add_outage_common(outage_omp);
  auto* outage_ex =
      outage->add_subcommand("exhaustive", "enumeration oracle (k <= 2)");
  add_outage_common(outage_ex);

  // ---- signal --------------------------------------------------------
  auto* signal = app.add_subcommand("signal", "waveform analysis");
  signal->require_subcommand(1);
  auto* sig_ph = signal->add_subcommand("phasor", "single-frequency phasor");
  std::string ph_wave;
  double ph_f0 = 50.0;
  int ph_start = 0;
  double ph_cycles = 1.0;
  sig_ph->add_option("--wave", ph_wave, "waveform CSV (time,value)")->required();
  sig_ph->add_option("--f0", ph_f0, "nominal frequency in Hz")
      ->capture_default_str();
  sig_ph->add_option("--start", ph_start, "window start sample")
      ->capture_default_str();
  sig_ph->add_option("--cycles", ph_cycles, "window length in nominal cycles")
      ->capture_default_str();

  auto* sig_md = signal->add_subcommand("modes", "ring-down mode estimation");
  std::string md_wave;
  int md_order = 4;
  sig_md->add_option("--wave", md_wave, "waveform CSV (time,value)")->required();
  sig_md->add_option("--order", md_order, "linear prediction order")
      ->capture_default_str();

  // ---- dispatch stack --------------------------------------------------
  auto* ed = app.add_subcommand("ed", "single-bus economic dispatch");
  std::string ed_instance;
  bool ed_chance = false;
  ed->add_option("--instance", ed_instance, "dispatch instance JSON file")
      ->required();
  ed->add_flag("--chance", ed_chance,
               "use the chance-constrained wind formulation");

  auto* opf = app.add_subcommand("opf", "DC optimal power flow with prices");
  std::string opf_case, opf_lmp_csv = "lmps.csv";
  double opf_penalty = 0.0;
  opf->add_option("--case", opf_case, "case JSON file")->required();
  opf->add_option("--penalty", opf_penalty,
                  "weight of the squared angle-difference penalty")
      ->capture_default_str();
  opf->add_option("--lmp-csv", opf_lmp_csv, "per-bus price CSV output path")
      ->capture_default_str();

  auto* uc = app.add_subcommand("uc", "unit commitment over a horizon");
  std::string uc_instance, uc_method = "lagrangian",
              uc_csv = "schedule.csv";
  int uc_iters = 500, uc_levels = 21;
  uc->add_option("--instance", uc_instance, "commitment instance JSON file")
      ->required();
  uc->add_option("--method", uc_method, "lagrangian or bruteforce")
      ->capture_default_str();
  uc->add_option("--iters", uc_iters, "subgradient iteration budget")
      ->capture_default_str();
  uc->add_option("--levels", uc_levels, "dynamic-programming power levels")
      ->capture_default_str();
  uc->add_option("--schedule-csv", uc_csv, "period-by-unit schedule CSV path")
      ->capture_default_str();

  auto* dr = app.add_subcommand("dr", "multi-user demand response");
  std::string dr_instance, dr_mode = "central";
  int dr_iters = 600;
  dr->add_option("--instance", dr_instance, "demand-response instance JSON")
      ->required();
  dr->add_option("--mode", dr_mode, "central or dual")->capture_default_str();
  dr->add_option("--iters", dr_iters, "price update budget (dual mode)")
      ->capture_default_str();

  auto* pev = app.add_subcommand("pev", "electric vehicle charging");
  pev->require_subcommand(1);
  std::string pev_fleet, pev_trace = "trace.csv";
  int pev_iters = 500;
  double pev_tol = 1e-6;
  auto* pev_central = pev->add_subcommand("central", "one-shot valley filling");
  pev_central->add_option("--fleet", pev_fleet, "fleet JSON file")->required();
  auto* pev_dist =
      pev->add_subcommand("distributed", "price-iterated valley filling");
  pev_dist->add_option("--fleet", pev_fleet, "fleet JSON file")->required();
  pev_dist->add_option("--iters", pev_iters, "iteration budget")
      ->capture_default_str();
  pev_dist->add_option("--tol", pev_tol, "profile-change stopping tolerance")
      ->capture_default_str();
  pev_dist->add_option("--trace", pev_trace, "per-iteration trace CSV path")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (case_validate->parsed()) {
      Run run("case validate");
      CaseGuard guard;
      guard.c = run.parse_case(cv_case);
      char* out = nullptr;
      if (gk_case_summary(guard.c, &out) != GK_OK)
        throw CliError{1, gk_last_error()};
      json summary = json::parse(out);
      gk_string_free(out);
      summary["valid"] = true;
      run.finish(summary, report_path);
    } else if (pf_dc->parsed()) {
      Run run("pf dc");
      CaseGuard guard;
      guard.c = run.parse_case(pfdc_case);
      json inj = json::parse(run.load("injections", pfdc_inj));
      json params;
      params["injections"] = inj.at("p");
      if (pfdc_ref >= 0) params["ref"] = pfdc_ref;
      json result = run.call(gk_pf_dc, guard.c, params);
      if (!pfdc_out.empty()) {
        std::ostringstream csv;
        csv << "bus,theta\n";
        for (size_t i = 0; i < result["theta"].size(); ++i)
          csv << result["bus_ids"][i].get<int>() << ','
              << csv_number(result["theta"][i].get<double>()) << '\n';
        write_file(pfdc_out, csv.str());
      }
      run.finish(result, report_path);
    } else if (pf_ac->parsed()) {
      Run run("pf ac");
      CaseGuard guard;
      guard.c = run.parse_case(pfac_case);
      json spec = json::parse(run.load("spec", pfac_spec));
      spec.erase("version");
      json params;
      params["spec"] = spec;
      params["tol"] = pfac_tol;
      params["max_iter"] = pfac_iter;
      json result = run.call(gk_pf_ac, guard.c, params);
      if (!pfac_out.empty()) {
        std::ostringstream csv;
        csv << "bus,vm,va\n";
        for (size_t i = 0; i < result["vm"].size(); ++i)
          csv << result["bus_ids"][i].get<int>() << ','
              << csv_number(result["vm"][i].get<double>()) << ','
              << csv_number(result["va"][i].get<double>()) << '\n';
        write_file(pfac_out, csv.str());
      }
      run.finish(result, report_path);
    } else if (se_run->parsed() || se_bad->parsed() || se_obs->parsed() ||
               se_atk->parsed()) {
      const std::string leaf = se_run->parsed()    ? "run"
                               : se_bad->parsed()  ? "baddata"
                               : se_obs->parsed()  ? "observe"
                                                   : "attack";
      Run run("se " + leaf);
      CaseGuard guard;
      guard.c = run.parse_case(se_case);
      json params;
      params["measurements"] = json::parse(run.load("meas", se_meas));
      if (se_ref >= 0) params["ref"] = se_ref;
      json result;
      if (se_run->parsed()) {
        params["mode"] = se_mode;
        params["tol"] = serun_tol;
        params["max_iter"] = serun_iter;
        result = run.call(gk_se_run, guard.c, params);
      } else if (se_bad->parsed()) {
        params["lnrt"] = bad_lnrt;
        params["alpha"] = bad_alpha;
        result = run.call(gk_se_baddata, guard.c, params);
      } else if (se_obs->parsed()) {
        params["method"] = obs_method;
        result = run.call(gk_se_observe, guard.c, params);
      } else {
        params["target"] = json::parse(run.load("target", atk_target));
        result = run.call(gk_se_attack, guard.c, params);
      }
      run.finish(result, report_path);
    } else if (outage_omp->parsed() || outage_ex->parsed()) {
      const bool greedy = outage_omp->parsed();
      Run run(greedy ? "outage omp" : "outage exhaustive");
      CaseGuard guard;
      guard.c = run.parse_case(out_case);
      json params;
      params["theta_pre"] = json::parse(run.load("pre", out_pre)).at("theta");
      params["theta_post"] = json::parse(run.load("post", out_post)).at("theta");
      params["method"] = greedy ? "omp" : "exhaustive";
      params["k"] = out_k;
      if (out_ref >= 0) params["ref"] = out_ref;
      if (!out_internal.empty()) {
        json ids = json::array();
        std::istringstream ss(out_internal);
        std::string tok;
        while (std::getline(ss, tok, ',')) ids.push_back(std::stoi(tok));
        params["internal"] = ids;
      }
      if (out_has_noise) {
        params["noise_db"] = out_noise_db;
        params["seed"] = out_seed;
      }
      run.finish(run.call(gk_outage_identify, guard.c, params), report_path);
    } else if (sig_ph->parsed()) {
      Run run("signal phasor");
      auto [samples, fs] = read_wave_csv(run.load("wave", ph_wave));
      json params;
      params["samples"] = samples;
      params["fs"] = fs;
      params["f0"] = ph_f0;
      params["start"] = ph_start;
      params["cycles"] = ph_cycles;
      run.finish(run.call(gk_signal_phasor, params), report_path);
    } else if (sig_md->parsed()) {
      Run run("signal modes");
      auto [samples, fs] = read_wave_csv(run.load("wave", md_wave));
      json params;
      params["samples"] = samples;
      params["fs"] = fs;
      params["order"] = md_order;
      run.finish(run.call(gk_signal_modes, params), report_path);
    } else if (ed->parsed()) {
      Run run("ed");
      json params = json::parse(run.load("instance", ed_instance));
      params.erase("version");
      params["mode"] = ed_chance ? "chance" : "forecast";
      run.finish(run.call(gk_ed, params), report_path);
    } else if (opf->parsed()) {
      Run run("opf");
      CaseGuard guard;
      guard.c = run.parse_case(opf_case);
      json params;
      params["penalty"] = opf_penalty;
      json result = run.call(gk_opf, guard.c, params);
      if (!opf_lmp_csv.empty()) {
        std::ostringstream csv;
        csv << "bus,lmp\n";
        for (size_t i = 0; i < result["lmps"].size(); ++i)
          csv << result["bus_ids"][i].get<int>() << ','
              << csv_number(result["lmps"][i].get<double>()) << '\n';
        write_file(opf_lmp_csv, csv.str());
      }
      run.finish(result, report_path);
    } else if (uc->parsed()) {
      Run run("uc");
      json params = json::parse(run.load("instance", uc_instance));
      params.erase("version");
      params["method"] = uc_method;
      params["iterations"] = uc_iters;
      params["levels"] = uc_levels;
      json result = run.call(gk_uc, params);
      if (!uc_csv.empty()) {
        std::ostringstream csv;
        csv << "period";
        const size_t n_units = result["on"].size();
        for (size_t m = 0; m < n_units; ++m)
          csv << ",unit" << m + 1 << "_on,unit" << m + 1 << "_p";
        csv << '\n';
        const size_t T = result["on"][0].size();
        for (size_t t = 0; t < T; ++t) {
          csv << t + 1;
          for (size_t m = 0; m < n_units; ++m)
            csv << ',' << result["on"][m][t].get<int>() << ','
                << csv_number(result["power"][m][t].get<double>());
          csv << '\n';
        }
        write_file(uc_csv, csv.str());
      }
      json summary;
      summary["primal"] = result["primal"];
      summary["dual"] = result["dual"];
      summary["gap"] = result["gap"];
      summary["on"] = result["on"];
      run.finish(summary, report_path);
    } else if (dr->parsed()) {
      Run run("dr");
      json params = json::parse(run.load("instance", dr_instance));
      params.erase("version");
      params["mode"] = dr_mode;
      params["iterations"] = dr_iters;
      run.finish(run.call(gk_dr, params), report_path);
    } else if (pev_central->parsed() || pev_dist->parsed()) {
      const bool central = pev_central->parsed();
      Run run(central ? "pev central" : "pev distributed");
      json params = json::parse(run.load("fleet", pev_fleet));
      params.erase("version");
      params["mode"] = central ? "central" : "distributed";
      if (!central) {
        params["iters"] = pev_iters;
        params["tol"] = pev_tol;
      }
      json result = run.call(gk_pev, params);
      if (!central && !pev_trace.empty()) {
        // iteration, objective, then the posted price (aggregate load)
        std::ostringstream csv;
        const size_t T = result["aggregate"].size();
        csv << "iteration,objective";
        for (size_t t = 0; t < T; ++t) csv << ",price" << t + 1;
        csv << '\n';
        for (size_t k = 0; k < result["objective_trace"].size(); ++k) {
          csv << k + 1 << ','
              << csv_number(result["objective_trace"][k].get<double>());
          for (size_t t = 0; t < T; ++t)
            csv << ',' << csv_number(result["price_trace"][k][t].get<double>());
          csv << '\n';
        }
        write_file(pev_trace, csv.str());
      }
      result.erase("price_trace");  // bulky; the CSV carries it
      run.finish(result, report_path);
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
