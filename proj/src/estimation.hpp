#pragma once

#include <optional>
#include <string>
#include <vector>

#include "netmodel.hpp"

namespace gridkit {

enum class MeasKind { Vmag, Pinj, Qinj, Pflow, Qflow, PhasorV, PhasorIline };

const char* meas_kind_name(MeasKind k);
MeasKind meas_kind_from_name(const std::string& name);

/// A single meter reading. Bus kinds use `bus`; branch kinds use `branch`
/// plus `from_side` for the metering direction. sigma is the noise scale
/// used for prewhitening and must stay positive.
struct Measurement {
  MeasKind kind = MeasKind::Vmag;
  int bus = -1;
  int branch = -1;
  bool from_side = true;
  double value = 0.0;
  double sigma = 1.0;
};

bool is_branch_kind(MeasKind k);
/// DC-compatible kinds enter the linear P-theta model z = H theta.
bool is_dc_kind(MeasKind k);

/// Measurement collection bound to a case topology. Rows of the design
/// matrices correspond 1:1 to the DC-compatible measurements (dc_rows).
/// Whitened quantities are scaled by 1/sigma so the noise is standard.
class MeasurementSet {
 public:
  MeasurementSet(const GridCase& c, std::vector<Measurement> items);

  int size() const { return static_cast<int>(items_.size()); }
  const std::vector<Measurement>& items() const { return items_; }

  const std::vector<int>& dc_rows() const { return dc_rows_; }
  /// Active-subproblem design over all bus columns (for observability).
  Mat dc_design_full() const;
  /// Whitened design with the reference column removed (estimation path).
  Mat dc_design_reduced(int ref) const;
  Vec dc_values_whitened() const;

  /// Q-V analogue rows (Vmag/Qinj/Qflow) for reactive-side observability.
  std::vector<int> qv_rows() const;
  Mat qv_design_full() const;

 private:
  std::vector<Measurement> items_;
  std::vector<int> dc_rows_;
  int n_buses_;
  std::vector<int> bfrom_, bto_;
  std::vector<double> bx_;  // branch reactances
  Mat Bx_;
};

std::vector<Measurement> measurements_from_json(const GridCase& c,
                                                const std::string& text);
std::string measurements_to_json(const GridCase& c,
                                 const std::vector<Measurement>& ms);

/// Evaluates h(state) for every measurement in the plan.
Vec measure_exact(const GridCase& c, const ComplexState& state,
                  const std::vector<Measurement>& plan);

/// Draws z = h(true_state) + noise_scale * sigma_i * N(0,1), reproducible by
/// seed. noise_scale = 0 keeps the exact values.
std::vector<Measurement> simulate_measurements(const GridCase& c,
                                               const ComplexState& true_state,
                                               std::vector<Measurement> plan,
                                               double noise_scale,
                                               unsigned seed);

struct WlsResult {
  ComplexState state;
  Vec residual;  // whitened z - h(state)
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Gauss-Newton on the whitened nonlinear measurement model. The reference
/// angle is pinned at the case slack bus. Divergence is flagged, not thrown;
/// a rank-deficient linearization signals unobservability and throws.
WlsResult wls_gauss_newton(const GridCase& c, const MeasurementSet& meas,
                           std::optional<ComplexState> init = std::nullopt,
                           double tol = 1e-8, int max_iter = 25);

struct EstimationResult {
  Vec state;     // estimated parameter vector (reduced theta)
  Vec residual;  // z - H theta_hat
  double objective = 0.0;
  int iterations = 1;
  bool converged = true;
};

/// Least squares for z = H theta + eps with full-column-rank H.
EstimationResult dc_linear_se(const Mat& H, const Vec& z);

/// Residual projector P = I - H (H'H)^{-1} H'.
Mat residual_projector(const Mat& H);

struct BadDataResult {
  bool chi2_detected = false;
  double chi2_stat = 0.0;
  double chi2_threshold = 0.0;
  std::vector<int> removed;  // original row indices, in removal order
  EstimationResult clean;    // estimate on the surviving rows
  bool halted_on_rank = false;
};

/// Chi-square detection plus iterative largest-normalized-residual removal.
/// Ties break toward the lower index; a removal that would break rank halts
/// the scan with the partial result.
BadDataResult bad_data_scan(const Mat& H, const Vec& z, double alpha = 0.01,
                            double lnrt_threshold = 3.0);

/// Indices whose residual projector column vanishes; removing any of them
/// makes the system unobservable.
std::vector<int> critical_measurements(const Mat& H);

struct ObservabilityResult {
  bool observable = false;
  std::vector<int> island;          // island id per bus, dense from 0
  std::vector<char> line_determined;  // per branch: flow recoverable / in forest
};

/// Numerical test: null(H) within null(A), islands from determined lines.
ObservabilityResult observability_numerical(const Mat& H_full, const Mat& A);

/// Topological test: maximal forest matching measurements to branches.
ObservabilityResult observability_topological(const GridCase& c,
                                              const std::vector<Measurement>& ms);

/// Gaussian-prior fusion: MAP estimate for z = H theta + eps with
/// theta ~ N(prior_mean, prior_cov).
EstimationResult fuse_prior(const Mat& H, const Vec& z, const Vec& prior_mean,
                            const Mat& prior_cov);

struct AttackVector {
  Vec c;  // state bias
  Vec a;  // meter corruption a = H c
  int support = 0;
};

/// Undetectable attack in range(H): residuals are untouched while the
/// estimate shifts by exactly c.
AttackVector build_attack(const Mat& H, const Vec& c);

}  // namespace gridkit
