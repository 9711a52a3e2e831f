#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "common.hpp"
#include "linalg.hpp"

namespace gridkit {

enum class BusType { Slack, Pv, Pq };

struct Bus {
  int id = 0;
  BusType type = BusType::Pq;
  double b_shunt = 0.0;  // shunt susceptance to ground, p.u.
  double v_min = 0.9;
  double v_max = 1.1;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;    // series reactance, must be > 0
  double b_c = 0.0;  // total charging susceptance
  double tap = 1.0;  // turn-ratio magnitude; 0 in the file is normalized to 1
  double shift = 0.0;  // turn-ratio phase, radians
  double p_max = 0.0;  // real flow limit; 0 = unlimited
  double s_max = 0.0;  // apparent flow limit; 0 = unlimited
};

struct QuadCost {
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  QuadCost cost;
};

struct Load {
  int bus = 0;
  double p = 0.0, q = 0.0;
};

/// Validated network description. Immutable once constructed; bus order is
/// file order and all cross-references are resolved to dense indices.
class GridCase {
 public:
  GridCase(std::vector<Bus> buses, std::vector<Branch> branches,
           std::vector<Generator> generators, std::vector<Load> loads);

  int n_buses() const { return static_cast<int>(buses_.size()); }
  int n_branches() const { return static_cast<int>(branches_.size()); }

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Load>& loads() const { return loads_; }

  int bus_index(int id) const;  // throws on unknown id
  int from_index(int l) const { return from_idx_[l]; }
  int to_index(int l) const { return to_idx_[l]; }
  int slack_index() const { return slack_idx_; }

  /// Net fixed injection per bus from loads only (negative of demand).
  Vec load_p() const;
  Vec load_q() const;

 private:
  std::vector<Bus> buses_;
  std::vector<Branch> branches_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  std::unordered_map<int, int> index_;
  std::vector<int> from_idx_, to_idx_;
  int slack_idx_ = -1;
};

/// Parses the versioned case JSON schema. Unknown keys are rejected and each
/// invariant violation yields a distinct diagnostic.
GridCase parse_case(const std::string& text);

/// Serializes back to the same schema (round-trip aid for tooling).
std::string case_to_json(const GridCase& c);

/// Bus admittance matrix together with the per-branch two-port blocks used
/// for line currents and flows.
struct AdmittanceModel {
  CMat Y;
  Mat G, B;  // Y = G + jB
  // I_from = y_ff V_from + y_ft V_to ; I_to = y_tf V_from + y_tt V_to
  struct TwoPort {
    int from, to;
    Complex y_ff, y_ft, y_tf, y_tt;
  };
  std::vector<TwoPort> two_port;
  bool has_phase_shift = false;  // Y is symmetric iff false
};

AdmittanceModel build_admittance(const GridCase& c);

/// DC (linear, lossless) model: incidence A, reactance weights D and the
/// weighted Laplacian B_x = A^T D A.
struct DcModel {
  Mat A;        // N_l x N_b incidence, +1 at from, -1 at to
  Vec D;        // 1/x per branch
  Mat Bx;       // weighted Laplacian
  Vec b_branch;  // branch susceptances b_mn = -1/x
  Vec b_shunt;   // per-bus b_mm = b_s + sum b_c/2
};

DcModel build_dc(const GridCase& c);

/// Per-bus complex voltages stored in polar form with helpers for the
/// rectangular representation.
struct ComplexState {
  Vec vm;  // magnitudes
  Vec va;  // angles, radians

  static ComplexState flat(int n);
  static ComplexState from_complex(const CVec& v);
  static ComplexState from_rect(const Vec& vr, const Vec& vi);
  CVec to_complex() const;
  Vec rect_real() const;
  Vec rect_imag() const;
  int size() const { return static_cast<int>(vm.size()); }
};

enum class Coords { Polar, Rect };

struct PQ {
  Vec p, q;
};

/// Complex power injections evaluated either through the polar or the
/// rectangular power-flow equations; both paths agree to round-off.
PQ ac_injections(const AdmittanceModel& model, const ComplexState& state,
                 Coords coords);

struct BranchFlow {
  Complex i_from, i_to;  // I_mn, I_nm
  Complex s_from, s_to;  // S_mn = V_m I_mn^*, S_nm = V_n I_nm^*
};

std::vector<BranchFlow> branch_flows(const AdmittanceModel& model,
                                     const ComplexState& state);

/// DC injections: P = B_x theta and the decoupled reactive analogue with the
/// shunt term, Q_m = -b_mm - sum_n b_mn (V_m - V_n).
PQ dc_injections(const DcModel& model, const Vec& theta, const Vec& v);

/// Connected components of the branch graph; component id per bus.
std::vector<int> connected_components(int n_buses,
                                      const std::vector<std::pair<int, int>>& edges);

}  // namespace gridkit
