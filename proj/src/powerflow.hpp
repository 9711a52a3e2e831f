#pragma once

#include <vector>

#include "netmodel.hpp"

namespace gridkit {

/// Bus classification for the standard power flow problem: the slack bus has
/// fixed (V, theta=0), PV buses fixed (P, V), PQ buses fixed (P, Q). P and Q
/// are net injections (generation minus load), p.u.
struct PfSpec {
  struct PvBus {
    int bus;  // case bus index
    double p;
    double v;
  };
  struct PqBus {
    int bus;
    double p;
    double q;
  };
  int slack_bus = 0;
  double slack_v = 1.0;
  std::vector<PvBus> pv;
  std::vector<PqBus> pq;

  void validate(const GridCase& c) const;  // every bus classified exactly once
};

struct PfOptions {
  double tol = 1e-8;
  int max_iter = 20;
};

struct PfSolution {
  ComplexState state;
  int iterations = 0;
  double mismatch = 0.0;  // final max power mismatch
  bool converged = false;
  std::vector<int> q_violations;  // PV buses whose generators exceed Q limits
};

/// Solves p = B_x theta on the reduced system with theta[ref] = 0.
/// Requires balanced injections and a connected network.
Vec solve_dc(const DcModel& model, const Vec& p, int ref_index);

/// Newton iteration on the polar mismatch equations from a flat start.
/// Non-convergence is reported through the flag, not an exception.
PfSolution solve_ac(const GridCase& c, const PfSpec& spec,
                    const PfOptions& opt = {});

}  // namespace gridkit
