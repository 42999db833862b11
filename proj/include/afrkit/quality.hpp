#pragma once

// Moving-window signal quality scanning. Each window of the region is scored
// per lead with the beat-agreement index of the two detectors; the mean over
// the 12 leads is what segment selection ranks.

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/qrs.hpp"
#include "afrkit/recordio.hpp"

namespace afrkit {

struct ScoredSegment {
  std::string patient_id;
  std::string phase;   // "pre" or "post"
  double start_s = 0;  // absolute within the source recording
  double dur_s = 0;
  double bsqi_mean = 0;
  std::array<double, kNumLeads> per_lead_bsqi{};
};

// bSQI = n_match / (n_a + n_b - n_match), the fraction of beats jointly seen
// by both detectors among all beats seen by either.
inline double bsqi(const PeakList& a, const PeakList& b, double tol_ms) {
  if (a.empty() && b.empty())
    throw InsufficientBeats("both peak lists are empty");
  const MatchCounts m = match_peaks(a, b, tol_ms);
  const double denom = static_cast<double>(m.n_a + m.n_b - m.n_match);
  return static_cast<double>(m.n_match) / denom;
}

struct ScanConfig {
  double overlap_s = 5.0;   // stride = window - overlap
  double stride_s = 0.0;    // > 0 overrides the overlap rule
  double match_tol_ms = 150.0;
};

// Scan `region` with windows of `window_s`, advancing by the configured
// stride; the last partial window is discarded. A lead where both detectors
// find nothing (or the window is undetectable) scores 0.
inline std::vector<ScoredSegment> scan(const Recording& region, double window_s,
                                       const ScanConfig& cfg = {},
                                       const std::string& phase = "",
                                       double region_start_s = 0.0) {
  const double duration = region.duration_s();
  if (duration + 1e-9 < window_s)
    throw RegionTooShort("region of " + format_double_short(duration) +
                         " s cannot fit a " + format_double_short(window_s) + " s window");
  double stride = cfg.stride_s > 0 ? cfg.stride_s : window_s - cfg.overlap_s;
  if (stride <= 0) throw ConfigError("window stride must be positive");

  std::vector<ScoredSegment> out;
  for (double start = 0.0; start + window_s <= duration + 1e-9; start += stride) {
    const Recording win = window(region, start, window_s);
    ScoredSegment seg;
    seg.patient_id = region.patient_id;
    seg.phase = phase;
    seg.start_s = region_start_s + start;
    seg.dur_s = window_s;
    double acc = 0.0;
    for (std::size_t l = 0; l < kNumLeads; ++l) {
      double score = 0.0;
      try {
        const PeakList a = detect_energy(win.samples[l], win.fs);
        const PeakList b = detect_filterbank(win.samples[l], win.fs);
        score = bsqi(a, b, cfg.match_tol_ms);
      } catch (const Error&) {
        score = 0.0;  // undetectable lead counts as zero quality
      }
      seg.per_lead_bsqi[l] = score;
      acc += score;
    }
    seg.bsqi_mean = acc / static_cast<double>(kNumLeads);
    out.push_back(std::move(seg));
  }
  return out;
}

// Top-k by mean bSQI (ties broken by earlier start). Returns empty when even
// the best window is below the exclusion threshold: the caller excludes the
// recording.
inline std::vector<ScoredSegment> select(std::vector<ScoredSegment> segments,
                                         std::size_t k, double threshold = 0.8) {
  if (k < 1) throw ConfigError("select requires k >= 1");
  std::stable_sort(segments.begin(), segments.end(),
                   [](const ScoredSegment& a, const ScoredSegment& b) {
                     if (a.bsqi_mean != b.bsqi_mean) return a.bsqi_mean > b.bsqi_mean;
                     return a.start_s < b.start_s;
                   });
  if (segments.empty() || segments.front().bsqi_mean < threshold) return {};
  if (segments.size() > k) segments.resize(k);
  return segments;
}

}  // namespace afrkit
