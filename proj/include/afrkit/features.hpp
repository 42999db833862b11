#pragma once

// Per-segment feature vector assembly: 23 HRV + 44 MOR per lead, 804 columns
// over the 12 leads, in a fixed lead-major order. Column names follow
// `<lead>_<feature>`, e.g. II_AVNN, V3_QT_int_med. Each lead is analyzed
// from its own peak list; anything undetectable on a lead leaves that lead's
// block missing rather than failing the segment.

#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/delineation.hpp"
#include "afrkit/hrv.hpp"
#include "afrkit/morphology.hpp"
#include "afrkit/qrs.hpp"
#include "afrkit/recordio.hpp"

namespace afrkit {

struct FeatureConfig {
  std::size_t hrv_min_intervals = 10;
  double rr_min_ms = 300.0;
  double rr_max_ms = 2000.0;
  std::size_t mor_min_beats = 3;
};

inline constexpr std::size_t kFeaturesPerLead = kNumHrvFeatures + 2 * kNumMorBiomarkers;
inline constexpr std::size_t kNumEcgFeatures = kFeaturesPerLead * kNumLeads;
static_assert(kFeaturesPerLead == 67, "23 HRV + 44 MOR per lead");
static_assert(kNumEcgFeatures == 804, "804 ECG features over the 12 leads");

inline const std::vector<std::string>& lead_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(kFeaturesPerLead);
    for (const auto& n : hrv_feature_names()) out.push_back(n);
    for (const auto& n : mor_biomarker_names()) {
      out.push_back(n + "_med");
      out.push_back(n + "_std");
    }
    return out;
  }();
  return names;
}

inline const std::vector<std::string>& ecg_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(kNumEcgFeatures);
    for (const auto& lead : standard_leads())
      for (const auto& f : lead_feature_names()) out.push_back(lead + "_" + f);
    return out;
  }();
  return names;
}

// Feature vector for one segment, aligned with ecg_feature_names(). Missing
// values are NaN.
inline std::vector<double> segment_features(const Recording& segment,
                                            const FeatureConfig& cfg = {}) {
  std::vector<double> out(kNumEcgFeatures, kMissing);
  for (std::size_t l = 0; l < kNumLeads; ++l) {
    const std::size_t base = l * kFeaturesPerLead;
    PeakList peaks;
    try {
      peaks = detect_energy(segment.samples[l], segment.fs);
    } catch (const Error&) {
      continue;
    }

    try {
      const RrSeries rr = filter_rr(rr_from_peaks(peaks, segment.leads[l]),
                                    cfg.rr_min_ms, cfg.rr_max_ms);
      const HrvResult hrv = hrv_features(rr, cfg.hrv_min_intervals);
      for (std::size_t i = 0; i < kNumHrvFeatures; ++i) out[base + i] = hrv.values[i];
    } catch (const Error&) {
      // lead HRV block stays missing
    }

    try {
      const FiducialSet fiducials =
          delineate(segment.samples[l], peaks, segment.fs, segment.leads[l]);
      const auto beats = mor_beats(fiducials, segment.samples[l], segment.fs);
      const auto agg = mor_aggregate(beats, cfg.mor_min_beats);
      std::size_t i = kNumHrvFeatures;
      for (const auto& name : mor_biomarker_names()) {
        out[base + i++] = agg.at(name + "_med");
        out[base + i++] = agg.at(name + "_std");
      }
    } catch (const Error&) {
      // lead MOR block stays missing
    }
  }
  return out;
}

}  // namespace afrkit
