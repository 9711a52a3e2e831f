#include "signals.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace gridkit {

void WaveRecord::validate() const {
  if (!(f0 > 0.0) || !(fs > 2.0 * f0))
    fail_invalid("sample rate must exceed twice the nominal frequency");
  if (samples.size() < static_cast<Eigen::Index>(std::ceil(fs / f0)))
    fail_invalid("record shorter than one nominal cycle");
}

Complex estimate_phasor(const WaveRecord& rec, int start, int count) {
  rec.validate();
  if (start < 0 || count <= 0 || start + count > rec.samples.size())
    fail_invalid("phasor window out of range");
  const double cycles = count * rec.f0 / rec.fs;
  if (std::abs(cycles - std::round(cycles)) > 1e-9 || std::round(cycles) < 1.0)
    fail_invalid("phasor window must span an integer number of nominal cycles");

  Complex acc(0.0, 0.0);
  const double w = 2.0 * M_PI * rec.f0 / rec.fs;
  for (int k = 0; k < count; ++k)
    acc += rec.samples[start + k] * std::polar(1.0, -w * k);
  return 2.0 * acc / static_cast<double>(count);
}

ModeSet prony_modes(const Vec& x, double fs, int order) {
  const int n = static_cast<int>(x.size());
  if (order < 1) fail_invalid("prony order must be positive");
  if (n < 2 * order + 1)
    fail_invalid("record too short for the requested order");

  // forward linear prediction x[k] = sum_j a_j x[k-1-j]
  const int rows = n - order;
  Mat T(rows, order);
  Vec b(rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < order; ++j) T(i, j) = x[order + i - 1 - j];
    b[i] = x[order + i];
  }
  Eigen::JacobiSVD<Mat> svd(T, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  if (svd.rank() == 0)
    fail_numeric("rank-deficient prediction matrix (order too high for data)");
  // minimum-norm solution keeps degenerate records (e.g. pure DC) workable;
  // spurious roots fall out at the amplitude pruning step
  Vec a = svd.solve(b);

  Mat companion = Mat::Zero(order, order);
  companion.row(0) = a.transpose();
  for (int i = 1; i < order; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Mat> es(companion);
  if (es.info() != Eigen::Success) fail_numeric("companion eigensolve failed");

  std::vector<Complex> roots;
  for (int i = 0; i < order; ++i) {
    Complex z = es.eigenvalues()[i];
    if (std::abs(z) > 1e-12) roots.push_back(z);
  }
  if (roots.empty()) fail_numeric("no usable signal poles");

  // amplitude/phase refit on the discovered poles
  CMat V(n, roots.size());
  for (int k = 0; k < n; ++k)
    for (size_t i = 0; i < roots.size(); ++i)
      V(k, i) = std::pow(roots[i], k);
  Eigen::JacobiSVD<CMat> vsvd(V, Eigen::ComputeThinU | Eigen::ComputeThinV);
  vsvd.setThreshold(1e-12);
  CVec xc = x.cast<Complex>();
  CVec h = vsvd.solve(xc);

  // merge conjugate pairs into real damped cosines
  ModeSet out;
  std::vector<char> used(roots.size(), 0);
  for (size_t i = 0; i < roots.size(); ++i) {
    if (used[i]) continue;
    const Complex z = roots[i];
    if (std::abs(z.imag()) < 1e-9 * std::max(1.0, std::abs(z.real()))) {
      used[i] = 1;
      Mode m;
      m.frequency = std::abs(std::arg(z)) * fs / (2.0 * M_PI);
      m.decay = -std::log(std::abs(z)) * fs;
      m.amplitude = std::abs(h[i]);
      m.phase = std::arg(h[i]);
      out.modes.push_back(m);
      continue;
    }
    // find the conjugate partner
    size_t partner = i;
    double best = kInf;
    for (size_t j = i + 1; j < roots.size(); ++j) {
      if (used[j]) continue;
      double d = std::abs(roots[j] - std::conj(z));
      if (d < best) {
        best = d;
        partner = j;
      }
    }
    used[i] = 1;
    Mode m;
    const Complex zp = z.imag() > 0.0 ? z : std::conj(z);
    const Complex hp = z.imag() > 0.0 ? h[i] : std::conj(h[i]);
    m.frequency = std::arg(zp) * fs / (2.0 * M_PI);
    m.decay = -std::log(std::abs(zp)) * fs;
    if (partner != i && best < 1e-6 * std::abs(z)) {
      used[partner] = 1;
      m.amplitude = std::abs(h[i]) + std::abs(h[partner]);
    } else {
      m.amplitude = 2.0 * std::abs(hp);
    }
    m.phase = std::arg(hp);
    out.modes.push_back(m);
  }

  // drop the near-zero artifacts introduced by the minimum-norm fit
  double amax = 0.0;
  for (const Mode& m : out.modes) amax = std::max(amax, m.amplitude);
  if (amax > 0.0) {
    std::erase_if(out.modes,
                  [&](const Mode& m) { return m.amplitude < 1e-8 * amax; });
  }
  std::sort(out.modes.begin(), out.modes.end(),
            [](const Mode& a, const Mode& b) { return a.frequency < b.frequency; });
  return out;
}

Vec synthesize_modes(const ModeSet& ms, double fs, int count) {
  Vec x = Vec::Zero(count);
  for (const Mode& m : ms.modes) {
    for (int k = 0; k < count; ++k) {
      const double t = k / fs;
      x[k] += m.amplitude * std::exp(-m.decay * t) *
              std::cos(2.0 * M_PI * m.frequency * t + m.phase);
    }
  }
  return x;
}

}  // namespace gridkit
