#pragma once

#include <string>

#include "netmodel.hpp"

namespace gridkit::report {

/// JSON front doors for every pipeline: each takes a JSON parameter document
/// and returns a JSON result document. Parameter schemas are documented in
/// the README. Errors surface as gridkit::Error.

std::string case_summary(const GridCase& c);
std::string pf_dc(const GridCase& c, const std::string& params);
std::string pf_ac(const GridCase& c, const std::string& params);
std::string se_run(const GridCase& c, const std::string& params);
std::string se_baddata(const GridCase& c, const std::string& params);
std::string se_observe(const GridCase& c, const std::string& params);
std::string se_attack(const GridCase& c, const std::string& params);
std::string outage_identify(const GridCase& c, const std::string& params);
std::string signal_phasor(const std::string& params);
std::string signal_modes(const std::string& params);
std::string ed(const std::string& params);
std::string opf(const GridCase& c, const std::string& params);
std::string uc(const std::string& params);
std::string dr(const std::string& params);
std::string pev(const std::string& params);

}  // namespace gridkit::report
