#include "gridkit/gridkit.h"

#include <cstring>
#include <new>
#include <string>

#include "common.hpp"
#include "netmodel.hpp"
#include "report.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

gk_status set_error(gk_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

gk_status map_error(const gridkit::Error& e) {
  switch (e.code()) {
    case gridkit::ErrorCode::Parse:
      return set_error(GK_ERR_PARSE, e.what());
    case gridkit::ErrorCode::Invalid:
      return set_error(GK_ERR_INVALID, e.what());
    case gridkit::ErrorCode::Numeric:
      return set_error(GK_ERR_NUMERIC, e.what());
  }
  return set_error(GK_ERR_NUMERIC, e.what());
}

template <typename Fn>
gk_status run_guarded(char** out_json, Fn&& fn) {
  if (!out_json) return set_error(GK_ERR_ARGUMENT, "null output pointer");
  *out_json = nullptr;
  try {
    std::string result = fn();
    *out_json = dup_string(result);
    if (!*out_json) return set_error(GK_ERR_NUMERIC, "allocation failure");
    return GK_OK;
  } catch (const gridkit::Error& e) {
    return map_error(e);
  } catch (const std::exception& e) {
    return set_error(GK_ERR_NUMERIC, e.what());
  }
}

const gridkit::GridCase* unwrap(const gk_case* c) {
  return reinterpret_cast<const gridkit::GridCase*>(c);
}

}  // namespace

extern "C" {

const char* gk_version(void) { return "1.0.0"; }

const char* gk_last_error(void) { return g_last_error.c_str(); }

void gk_string_free(char* s) { delete[] s; }

gk_status gk_case_parse(const char* json_text, gk_case** out_case) {
  if (!json_text || !out_case)
    return set_error(GK_ERR_ARGUMENT, "null argument");
  *out_case = nullptr;
  try {
    auto* parsed = new gridkit::GridCase(gridkit::parse_case(json_text));
    *out_case = reinterpret_cast<gk_case*>(parsed);
    return GK_OK;
  } catch (const gridkit::Error& e) {
    return map_error(e);
  } catch (const std::exception& e) {
    return set_error(GK_ERR_PARSE, e.what());
  }
}

void gk_case_free(gk_case* c) {
  delete reinterpret_cast<gridkit::GridCase*>(c);
}

gk_status gk_case_summary(const gk_case* c, char** out_json) {
  if (!c) return set_error(GK_ERR_ARGUMENT, "null case handle");
  return run_guarded(out_json,
                     [&] { return gridkit::report::case_summary(*unwrap(c)); });
}

#define GK_CASE_PIPELINE(NAME, FN)                                         \
  gk_status NAME(const gk_case* c, const char* params_json,                \
                 char** out_json) {                                        \
    if (!c) return set_error(GK_ERR_ARGUMENT, "null case handle");         \
    if (!params_json)                                                      \
      return set_error(GK_ERR_ARGUMENT, "null parameter document");        \
    return run_guarded(out_json, [&] {                                     \
      return gridkit::report::FN(*unwrap(c), params_json);                 \
    });                                                                    \
  }

#define GK_PLAIN_PIPELINE(NAME, FN)                                        \
  gk_status NAME(const char* params_json, char** out_json) {               \
    if (!params_json)                                                      \
      return set_error(GK_ERR_ARGUMENT, "null parameter document");        \
    return run_guarded(out_json,                                           \
                       [&] { return gridkit::report::FN(params_json); });  \
  }

GK_CASE_PIPELINE(gk_pf_dc, pf_dc)
GK_CASE_PIPELINE(gk_pf_ac, pf_ac)
GK_CASE_PIPELINE(gk_se_run, se_run)
GK_CASE_PIPELINE(gk_se_baddata, se_baddata)
GK_CASE_PIPELINE(gk_se_observe, se_observe)
GK_CASE_PIPELINE(gk_se_attack, se_attack)
GK_CASE_PIPELINE(gk_outage_identify, outage_identify)
GK_CASE_PIPELINE(gk_opf, opf)
GK_PLAIN_PIPELINE(gk_signal_phasor, signal_phasor)
GK_PLAIN_PIPELINE(gk_signal_modes, signal_modes)
GK_PLAIN_PIPELINE(gk_ed, ed)
GK_PLAIN_PIPELINE(gk_uc, uc)
GK_PLAIN_PIPELINE(gk_dr, dr)
GK_PLAIN_PIPELINE(gk_pev, pev)

#undef GK_CASE_PIPELINE
#undef GK_PLAIN_PIPELINE

}  // extern "C"
