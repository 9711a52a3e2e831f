#pragma once

#include <utility>
#include <vector>

#include "netmodel.hpp"

namespace gridkit {

/// Sparse overcomplete regression for line-outage identification. Column l
/// of F is the internal-bus response of a unit outage coefficient on line l;
/// the observation is the internal part of the pre/post angle difference.
struct OutageModel {
  Mat F;            // |internal \ ref| x N_l
  Vec observation;  // angle differences on the internal buses (ref excluded)
  std::vector<int> internal_rows;  // bus index per row of F
  int ref = 0;
  int n_lines = 0;
};

struct OutageEstimate {
  std::vector<int> lines;  // identified support, ascending
  Vec m_hat;               // N_l vector, nonzero only on the support
  double residual = 0.0;   // LS misfit norm
};

/// Assembles the difference model from pre/post angle profiles. Both states
/// must share the reference (zero-angle) bus, which has to be internal.
OutageModel build_outage_model(const DcModel& dc, const Vec& theta_pre,
                               const Vec& theta_post,
                               const std::vector<int>& internal_buses, int ref);

/// Global least-squares search over all supports of size k (k <= 2).
OutageEstimate identify_exhaustive(const OutageModel& model, int k);

/// Orthogonal greedy selection with least-squares refit on the support.
/// Stops at max_support columns or when the residual drops below the
/// threshold.
OutageEstimate identify_omp(const OutageModel& model, int max_support,
                            double residual_threshold = 0.0);

/// Copy of the case without the given branches.
GridCase remove_branches(const GridCase& c, const std::vector<int>& lines);

/// Re-solves the DC flow with unchanged injections on the outaged topology.
/// Returns (theta_pre, theta_post). Throws if the post-event grid is
/// disconnected.
std::pair<Vec, Vec> simulate_line_outage(const GridCase& c, const Vec& p,
                                         const std::vector<int>& lines, int ref);

}  // namespace gridkit
