#pragma once

#include <vector>

#include "common.hpp"
#include "linalg.hpp"

namespace gridkit {

/// Sampled real waveform at rate fs with nominal system frequency f0.
struct WaveRecord {
  Vec samples;
  double fs = 0.0;  // Hz
  double f0 = 0.0;  // Hz
  void validate() const;  // fs > 2 f0, at least one nominal cycle
};

/// Single-frequency phasor from a window of samples: correlation with the
/// sampled cosine/sine at f0 (the first non-DC DFT bin of the window).
/// Returns A e^{j phi} for an input A cos(2 pi f0 t + phi), with t measured
/// from the window start; the window must span a whole number of nominal
/// cycles.
Complex estimate_phasor(const WaveRecord& rec, int start, int count);

struct Mode {
  double frequency = 0.0;  // Hz
  double decay = 0.0;      // 1/s, positive means damped
  double amplitude = 0.0;
  double phase = 0.0;  // radians
};

struct ModeSet {
  std::vector<Mode> modes;  // conjugate pairs merged, sorted by frequency
};

/// Ring-down modal analysis: forward linear prediction, companion-matrix
/// roots, then a Vandermonde least-squares refit of amplitudes and phases.
ModeSet prony_modes(const Vec& samples, double fs, int order);

/// Sum of damped cosines sampled at fs (round-trip helper).
Vec synthesize_modes(const ModeSet& ms, double fs, int count);

}  // namespace gridkit
