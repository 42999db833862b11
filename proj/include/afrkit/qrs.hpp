#pragma once

// Two algorithmically independent R-peak detectors plus beat matching. Their
// disagreement on noisy signal is what makes the downstream quality index
// informative, so they deliberately use different passbands and different
// threshold machinery:
//
//   detect_energy     band-pass 5-15 Hz, derivative, squaring, 150 ms
//                     moving-window integration, running signal/noise peak
//                     estimates (Pan-Tompkins style).
//   detect_filterbank band-pass 10-25 Hz, squared-energy envelope against a
//                     rolling-maximum threshold, with gap search-back.
//
// Both refine detections to the local absolute maximum of their band-passed
// signal within +-100 ms, enforce a 250 ms refractory period, and ignore a
// 200 ms margin at each end of the segment where filter transients live.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <tuple>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/signal.hpp"

namespace afrkit {

struct PeakList {
  std::vector<std::size_t> indices;  // strictly increasing sample indices
  double fs = 0.0;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

namespace detail {

inline void check_detector_pre(std::size_t n, double fs) {
  if (fs < 250.0) throw SignalTooShort("detector requires fs >= 250 Hz");
  if (static_cast<double>(n) < 2.0 * fs)
    throw SignalTooShort("detector requires at least 2 s of signal");
}

inline std::size_t ms_to_samples(double ms, double fs) {
  return static_cast<std::size_t>(std::lround(ms * fs / 1000.0));
}

// Local maxima (plateaus yield their first sample).
inline std::vector<std::size_t> local_maxima(const std::vector<double>& x) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (x[i] > x[i - 1] && x[i] >= x[i + 1]) out.push_back(i);
  return out;
}

// Move each detection to the absolute maximum of |y| within +-100 ms, then
// enforce the refractory period (keep the stronger of two close peaks) and
// drop detections inside the boundary margin.
inline std::vector<std::size_t> refine_and_dedup(const std::vector<std::size_t>& raw,
                                                 const std::vector<double>& y,
                                                 double fs) {
  const std::size_t n = y.size();
  const std::size_t search = ms_to_samples(100.0, fs);
  const std::size_t refractory = ms_to_samples(250.0, fs);
  const std::size_t margin = ms_to_samples(200.0, fs);

  std::vector<std::size_t> refined;
  refined.reserve(raw.size());
  for (std::size_t c : raw) {
    const std::size_t lo = c > search ? c - search : 0;
    const std::size_t hi = std::min(n - 1, c + search);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i)
      if (std::fabs(y[i]) > std::fabs(y[best])) best = i;
    refined.push_back(best);
  }
  std::sort(refined.begin(), refined.end());
  refined.erase(std::unique(refined.begin(), refined.end()), refined.end());

  std::vector<std::size_t> kept;
  for (std::size_t p : refined) {
    if (!kept.empty() && p - kept.back() < refractory) {
      if (std::fabs(y[p]) > std::fabs(y[kept.back()])) kept.back() = p;
      continue;
    }
    kept.push_back(p);
  }

  std::vector<std::size_t> out;
  for (std::size_t p : kept)
    if (p >= margin && p + margin < n) out.push_back(p);
  return out;
}

}  // namespace detail

// Pan-Tompkins style detector (fills the epltd role).
inline PeakList detect_energy(const std::vector<double>& x, double fs) {
  detail::check_detector_pre(x.size(), fs);
  const auto y = bandpass_zero_phase(x, 5.0, 15.0, fs);

  const std::size_t n = y.size();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double d = y[i + 1] - y[i - 1];
    sq[i] = d * d;
  }
  const auto integ = moving_average(sq, detail::ms_to_samples(150.0, fs));

  const double global_max = *std::max_element(integ.begin(), integ.end());
  if (global_max < 1e-12) return PeakList{{}, fs};

  // Learning phase: seed running estimates from the first two seconds.
  const std::size_t learn = std::min(n, detail::ms_to_samples(2000.0, fs));
  double learn_max = 0.0, learn_mean = 0.0;
  for (std::size_t i = 0; i < learn; ++i) {
    learn_max = std::max(learn_max, integ[i]);
    learn_mean += integ[i];
  }
  learn_mean /= static_cast<double>(learn);

  double spki = 0.4 * learn_max;
  double npki = 0.5 * learn_mean;
  const std::size_t refractory = detail::ms_to_samples(250.0, fs);

  std::vector<std::size_t> accepted;
  long last_accept = -static_cast<long>(2 * refractory);
  for (std::size_t c : detail::local_maxima(integ)) {
    const double thr = npki + 0.25 * (spki - npki);
    if (integ[c] >= thr) {
      if (static_cast<long>(c) - last_accept < static_cast<long>(refractory))
        continue;  // same beat's energy, no estimate update
      accepted.push_back(c);
      last_accept = static_cast<long>(c);
      spki = 0.125 * integ[c] + 0.875 * spki;
    } else {
      npki = 0.125 * integ[c] + 0.875 * npki;
    }
  }
  return PeakList{detail::refine_and_dedup(accepted, y, fs), fs};
}

// Independent single-stage energy detector (fills the jQRS reference role).
inline PeakList detect_filterbank(const std::vector<double>& x, double fs) {
  detail::check_detector_pre(x.size(), fs);
  const auto y = bandpass_zero_phase(x, 10.0, 25.0, fs);

  const std::size_t n = y.size();
  std::vector<double> energy(n);
  for (std::size_t i = 0; i < n; ++i) energy[i] = y[i] * y[i];
  const auto env = moving_average(energy, detail::ms_to_samples(120.0, fs));

  const double global_max = *std::max_element(env.begin(), env.end());
  if (global_max < 1e-12) return PeakList{{}, fs};

  const auto local_ceiling = rolling_max(env, detail::ms_to_samples(2500.0, fs));
  const double frac = 0.18;

  std::vector<std::size_t> accepted;
  for (std::size_t c : detail::local_maxima(env))
    if (env[c] >= frac * local_ceiling[c]) accepted.push_back(c);

  // Search-back: re-scan long gaps with a halved threshold.
  for (int pass = 0; pass < 2 && accepted.size() >= 3; ++pass) {
    std::vector<double> rr;
    for (std::size_t i = 1; i < accepted.size(); ++i)
      rr.push_back(static_cast<double>(accepted[i] - accepted[i - 1]));
    const double med_rr = median_of(rr);
    const auto guard = detail::ms_to_samples(250.0, fs);
    std::vector<std::size_t> added;
    for (std::size_t i = 1; i < accepted.size(); ++i) {
      if (static_cast<double>(accepted[i] - accepted[i - 1]) <= 1.6 * med_rr) continue;
      const std::size_t lo = accepted[i - 1] + guard;
      const std::size_t hi = accepted[i] > guard ? accepted[i] - guard : 0;
      std::size_t best = 0;
      double best_env = 0.0;
      for (std::size_t j = lo; j < hi && j + 1 < n; ++j) {
        if (env[j] > env[j - 1] && env[j] >= env[j + 1] &&
            env[j] >= 0.5 * frac * local_ceiling[j] && env[j] > best_env) {
          best = j;
          best_env = env[j];
        }
      }
      if (best_env > 0.0) added.push_back(best);
    }
    if (added.empty()) break;
    accepted.insert(accepted.end(), added.begin(), added.end());
    std::sort(accepted.begin(), accepted.end());
  }
  return PeakList{detail::refine_and_dedup(accepted, y, fs), fs};
}

struct MatchCounts {
  std::size_t n_match = 0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// Greedy one-to-one nearest matching: candidate pairs within tol_ms ranked by
// |dt|, each peak used at most once.
inline MatchCounts match_peaks(const PeakList& a, const PeakList& b, double tol_ms) {
  if (tol_ms <= 0) throw OutOfBounds("match tolerance must be positive");
  MatchCounts counts;
  counts.n_a = a.size();
  counts.n_b = b.size();
  if (a.empty() || b.empty()) return counts;

  const double tol_samples = tol_ms * a.fs / 1000.0;
  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  std::size_t j_start = 0;
  for (std::size_t i = 0; i < a.indices.size(); ++i) {
    const double ai = static_cast<double>(a.indices[i]);
    while (j_start < b.indices.size() &&
           static_cast<double>(b.indices[j_start]) < ai - tol_samples)
      ++j_start;
    for (std::size_t j = j_start; j < b.indices.size(); ++j) {
      const double dt = static_cast<double>(b.indices[j]) - ai;
      if (dt > tol_samples) break;
      candidates.emplace_back(std::fabs(dt), i, j);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  for (const auto& [dist, i, j] : candidates) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = true;
    ++counts.n_match;
  }
  return counts;
}

}  // namespace afrkit
