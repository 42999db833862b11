#pragma once

// DSP primitives: second-order Butterworth sections designed by bilinear
// transform, zero-phase forward-backward application with reflected edge
// padding, moving averages and a rolling maximum. All filters used for
// fiducial work run forward-backward so detections are not skewed by group
// delay.

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "afrkit/common.hpp"

namespace afrkit {

struct Biquad {
  double b0, b1, b2;  // numerator
  double a1, a2;      // denominator (a0 normalized to 1)

  void apply_in_place(std::vector<double>& x) const {
    double w1 = 0.0, w2 = 0.0;  // direct form II transposed state
    for (double& v : x) {
      const double in = v;
      const double out = b0 * in + w1;
      w1 = b1 * in - a1 * out + w2;
      w2 = b2 * in - a2 * out;
      v = out;
    }
  }
};

// 2nd-order Butterworth low-pass (Q = 1/sqrt(2)), RBJ bilinear design.
inline Biquad butter_lowpass(double cutoff_hz, double fs) {
  const double w0 = 2.0 * M_PI * cutoff_hz / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / std::sqrt(2.0);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0 = (1.0 - cw) / 2.0 / a0;
  q.b1 = (1.0 - cw) / a0;
  q.b2 = q.b0;
  q.a1 = -2.0 * cw / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

inline Biquad butter_highpass(double cutoff_hz, double fs) {
  const double w0 = 2.0 * M_PI * cutoff_hz / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / std::sqrt(2.0);
  const double a0 = 1.0 + alpha;
  Biquad q;
  q.b0 = (1.0 + cw) / 2.0 / a0;
  q.b1 = -(1.0 + cw) / a0;
  q.b2 = q.b0;
  q.a1 = -2.0 * cw / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

namespace detail {

// Odd (point-symmetric) reflection keeps the padded signal continuous in
// value and slope, which tames filtfilt edge transients.
inline std::vector<double> reflect_pad(const std::vector<double>& x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> out;
  out.reserve(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    const std::size_t j = std::min(pad - i, n - 1);
    out.push_back(2.0 * x.front() - x[j]);
  }
  out.insert(out.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < pad; ++i) {
    const std::size_t j = n - 1 - std::min(i + 1, n - 1);
    out.push_back(2.0 * x.back() - x[j]);
  }
  return out;
}

}  // namespace detail

// Zero-phase application of a section cascade (forward pass, reverse, forward
// again, reverse). Pad length defaults to 3 * fs / lowest_corner-ish; callers
// pass an explicit pad in samples.
inline std::vector<double> filtfilt(const std::vector<double>& x,
                                    const std::vector<Biquad>& sections,
                                    std::size_t pad) {
  if (x.empty()) return {};
  pad = std::min(pad, x.size() > 1 ? x.size() - 1 : std::size_t{0});
  std::vector<double> y = pad ? detail::reflect_pad(x, pad) : x;
  for (const auto& s : sections) s.apply_in_place(y);
  std::reverse(y.begin(), y.end());
  for (const auto& s : sections) s.apply_in_place(y);
  std::reverse(y.begin(), y.end());
  if (pad) y = std::vector<double>(y.begin() + static_cast<long>(pad),
                                   y.end() - static_cast<long>(pad));
  return y;
}

// Band-pass as high-pass + low-pass cascade, zero phase.
inline std::vector<double> bandpass_zero_phase(const std::vector<double>& x,
                                               double lo_hz, double hi_hz, double fs) {
  const std::vector<Biquad> sections = {butter_highpass(lo_hz, fs),
                                        butter_lowpass(hi_hz, fs)};
  const auto pad = static_cast<std::size_t>(std::lround(fs));  // 1 s of padding
  return filtfilt(x, sections, pad);
}

// Centered moving average, window of `w` samples (forced odd).
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
  if (w < 1) w = 1;
  if (w % 2 == 0) ++w;
  const std::size_t n = x.size();
  const long half = static_cast<long>(w / 2);
  std::vector<double> out(n, 0.0);
  double acc = 0.0;
  long lo = 0, hi = -1;  // current [lo, hi] window
  for (long i = 0; i < static_cast<long>(n); ++i) {
    const long want_lo = std::max<long>(0, i - half);
    const long want_hi = std::min<long>(static_cast<long>(n) - 1, i + half);
    while (hi < want_hi) acc += x[static_cast<std::size_t>(++hi)];
    while (lo < want_lo) acc -= x[static_cast<std::size_t>(lo++)];
    out[static_cast<std::size_t>(i)] = acc / static_cast<double>(want_hi - want_lo + 1);
  }
  return out;
}

// Rolling maximum over a centered window, monotonic-deque, O(n).
inline std::vector<double> rolling_max(const std::vector<double>& x, std::size_t w) {
  if (w < 1) w = 1;
  if (w % 2 == 0) ++w;
  const long n = static_cast<long>(x.size());
  const long half = static_cast<long>(w / 2);
  std::vector<double> out(x.size(), 0.0);
  std::deque<long> dq;  // indices, values decreasing
  long added = -1;
  for (long i = 0; i < n; ++i) {
    const long want_hi = std::min(n - 1, i + half);
    while (added < want_hi) {
      ++added;
      while (!dq.empty() && x[static_cast<std::size_t>(dq.back())] <=
                                x[static_cast<std::size_t>(added)])
        dq.pop_back();
      dq.push_back(added);
    }
    const long want_lo = std::max<long>(0, i - half);
    while (!dq.empty() && dq.front() < want_lo) dq.pop_front();
    out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(dq.front())];
  }
  return out;
}

// Central-difference slope in units per millisecond.
inline std::vector<double> slope_per_ms(const std::vector<double>& x, double fs) {
  const std::size_t n = x.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const double scale = fs / 2000.0;  // (x[i+1]-x[i-1]) / (2 samples) * fs / 1000
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (x[i + 1] - x[i - 1]) * scale;
  out[0] = (x[1] - x[0]) * fs / 1000.0;
  out[n - 1] = (x[n - 1] - x[n - 2]) * fs / 1000.0;
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kMissing;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return kMissing;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Population standard deviation.
inline double pop_std_of(const std::vector<double>& v) {
  if (v.empty()) return kMissing;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

// Sample standard deviation (n - 1).
inline double sample_std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace afrkit
