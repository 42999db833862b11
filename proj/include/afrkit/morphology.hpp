#pragma once

// Per-beat morphological biomarkers from the fiducial set, and their
// per-segment median / population-std aggregates (44 values per lead).
// Intervals are milliseconds, amplitudes microvolts relative to the PR
// isoelectric baseline, areas microvolt-milliseconds. A missing fiducial
// leaves the dependent biomarkers missing for that beat.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/delineation.hpp"

namespace afrkit {

inline constexpr std::size_t kNumMorBiomarkers = 22;

inline const std::array<std::string, kNumMorBiomarkers>& mor_biomarker_names() {
  static const std::array<std::string, kNumMorBiomarkers> names = {
      "Pwave_int", "PR_int", "PR2_int", "PR_seg",  "QRS_int", "QT_int",
      "QT_cB",     "QT_cF",  "QT_cH",   "RR_int",  "ST_seg",  "TP_seg",
      "Twave_int", "Jpoint", "R_dep",   "Rwave",   "Twave",   "Pwave",
      "Qwave",     "Swave",  "ST_dev",  "QRS_area"};
  return names;
}

struct MorBeat {
  std::array<double, kNumMorBiomarkers> values;

  MorBeat() { values.fill(kMissing); }

  double& at(const std::string& name) {
    const auto& names = mor_biomarker_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw ConfigError("unknown biomarker " + name);
  }
  double get(const std::string& name) const {
    return const_cast<MorBeat*>(this)->at(name);
  }
};

inline std::vector<MorBeat> mor_beats(const FiducialSet& fiducials,
                                      const std::vector<double>& x, double fs) {
  if (fiducials.beats.empty()) throw EmptyFiducials("no beats to measure");
  const auto w = delineation_signal(x, fs);
  const auto slope = slope_per_ms(w, fs);
  const long n = static_cast<long>(w.size());
  const double to_ms = 1000.0 / fs;
  auto ms = [fs](double v) { return static_cast<long>(std::lround(v * fs / 1000.0)); };

  std::vector<MorBeat> out;
  out.reserve(fiducials.beats.size());
  for (std::size_t k = 0; k < fiducials.beats.size(); ++k) {
    const FiducialBeat& b = fiducials.beats[k];
    const FiducialBeat* next =
        (k + 1 < fiducials.beats.size()) ? &fiducials.beats[k + 1] : nullptr;
    MorBeat m;
    const double base = b.baseline_uv;
    auto have = [](long v) { return v != kNoFiducial; };
    auto interval = [&](long from, long to) -> double {
      if (!have(from) || !have(to)) return kMissing;
      return static_cast<double>(to - from) * to_ms;
    };
    auto amp_at = [&](long i) -> double {
      if (!have(i) || i < 0 || i >= n) return kMissing;
      return w[static_cast<std::size_t>(i)] - base;
    };

    m.at("Pwave_int") = interval(b.p_on, b.p_off);
    m.at("PR_int") = interval(b.p_on, b.qrs_on);
    m.at("PR2_int") = interval(b.p_peak, b.r);
    m.at("PR_seg") = interval(b.p_off, b.qrs_on);
    m.at("QRS_int") = interval(b.qrs_on, b.j);
    m.at("QT_int") = interval(b.qrs_on, b.t_off);
    m.at("Twave_int") = interval(b.j, b.t_off);
    m.at("R_dep") = interval(b.q, b.r);

    const double rr_ms_v = next ? interval(b.r, next->r) : kMissing;
    m.at("RR_int") = rr_ms_v;
    m.at("TP_seg") = next ? interval(b.t_off, next->p_on) : kMissing;

    const double qt = m.get("QT_int");
    if (!is_missing(qt) && !is_missing(rr_ms_v) && rr_ms_v > 0) {
      const double rr_s = rr_ms_v / 1000.0;
      m.at("QT_cB") = qt / std::sqrt(rr_s);
      m.at("QT_cF") = qt / std::cbrt(rr_s);
      m.at("QT_cH") = qt + 1.75 * (60000.0 / rr_ms_v - 60.0);
    }

    m.at("Rwave") = amp_at(b.r);
    m.at("Pwave") = amp_at(b.p_peak);
    m.at("Qwave") = amp_at(b.q);
    m.at("Swave") = amp_at(b.s);
    m.at("Twave") = amp_at(b.t_peak);
    m.at("Jpoint") = amp_at(b.j);
    if (have(b.j) && b.j + ms(60.0) < n) m.at("ST_dev") = amp_at(b.j + ms(60.0));

    // ST segment: J to the T upstroke start (first point after J whose slope
    // toward the T peak exceeds 10% of the maximal T upslope).
    if (have(b.j) && have(b.t_peak) && b.t_peak > b.j) {
      const double sgn_t = (w[static_cast<std::size_t>(b.t_peak)] - base) >= 0 ? 1.0 : -1.0;
      double up_max = 0.0;
      for (long i = b.j; i <= b.t_peak; ++i)
        up_max = std::max(up_max, sgn_t * slope[static_cast<std::size_t>(i)]);
      if (up_max > 0.0) {
        for (long i = b.j; i <= b.t_peak; ++i) {
          if (sgn_t * slope[static_cast<std::size_t>(i)] >= 0.10 * up_max) {
            m.at("ST_seg") = static_cast<double>(i - b.j) * to_ms;
            break;
          }
        }
      }
    }

    if (have(b.qrs_on) && have(b.j)) {
      double area = 0.0;
      for (long i = b.qrs_on; i <= b.j; ++i)
        area += std::fabs(w[static_cast<std::size_t>(i)] - base) * to_ms;
      m.at("QRS_area") = area;
    }
    out.push_back(m);
  }
  return out;
}

// Median and population standard deviation per biomarker; an aggregate needs
// at least `min_present` contributing beats, otherwise it is missing.
inline std::map<std::string, double> mor_aggregate(const std::vector<MorBeat>& beats,
                                                   std::size_t min_present = 3) {
  std::map<std::string, double> out;
  for (std::size_t bi = 0; bi < kNumMorBiomarkers; ++bi) {
    const std::string& name = mor_biomarker_names()[bi];
    std::vector<double> present;
    for (const auto& beat : beats)
      if (!is_missing(beat.values[bi])) present.push_back(beat.values[bi]);
    if (present.size() >= min_present) {
      out[name + "_med"] = median_of(present);
      out[name + "_std"] = pop_std_of(present);
    } else {
      out[name + "_med"] = kMissing;
      out[name + "_std"] = kMissing;
    }
  }
  return out;
}

}  // namespace afrkit
