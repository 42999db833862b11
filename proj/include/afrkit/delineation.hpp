#pragma once

// Per-beat fiducial location on a single lead. Rules:
//   - working signal = zero-phase 0.5-45 Hz band-pass (wander removed,
//     morphology preserved);
//   - QRS onset/offset: nearest point to R where |slope| stays below 5% of
//     the per-beat maximum |slope| for 8 ms, searched within +-80 ms of R;
//   - Q and S: the most opposite-polarity deflection between the QRS bounds
//     and R, kept only when clearly below baseline;
//   - P: peak of |deviation| inside [qrs_on - 250 ms, qrs_on - 50 ms],
//     boundaries where the deviation falls to e^-2 of the peak (the 2-sigma
//     point of a Gaussian wave);
//   - T peak: largest |deviation| in [j + 20 ms, j + min(400 ms, 0.6 RR)];
//     T offset by the tangent method on the steepest T flank.
//
// First and last beats get QRS fiducials only. A wave that cannot be located
// is left missing and the dependent biomarkers go missing downstream.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/qrs.hpp"
#include "afrkit/signal.hpp"

namespace afrkit {

inline constexpr long kNoFiducial = -1;

struct FiducialBeat {
  long p_on = kNoFiducial, p_peak = kNoFiducial, p_off = kNoFiducial;
  long qrs_on = kNoFiducial, q = kNoFiducial;
  long r = kNoFiducial;  // always present
  long s = kNoFiducial, j = kNoFiducial;
  long t_peak = kNoFiducial, t_off = kNoFiducial;
  double baseline_uv = 0.0;  // isoelectric reference for amplitude biomarkers
  bool boundary = false;

  bool ordered() const {
    long prev = 0;
    bool first = true;
    for (long v : {p_on, p_peak, p_off, qrs_on, q, r, s, j, t_peak, t_off}) {
      if (v == kNoFiducial) continue;
      if (!first && v < prev) return false;
      prev = v;
      first = false;
    }
    return true;
  }

  bool complete() const {
    for (long v : {p_on, p_peak, p_off, qrs_on, q, r, s, j, t_peak, t_off})
      if (v == kNoFiducial) return false;
    return true;
  }
};

struct FiducialSet {
  std::string lead;
  double fs = 0.0;
  std::vector<FiducialBeat> beats;
};

// Shared with morphology so amplitudes are measured on the same signal the
// fiducials were found on.
inline std::vector<double> delineation_signal(const std::vector<double>& x, double fs) {
  const std::vector<Biquad> sections = {butter_highpass(0.5, fs), butter_lowpass(45.0, fs)};
  return filtfilt(x, sections, static_cast<std::size_t>(std::lround(fs)));
}

namespace detail {

// Scan away from `from` looking for the nearest index where |slope| stays
// under `thr` for `run_min` consecutive samples. Returns the run sample
// adjacent to the active region, or kNoFiducial.
inline long quiet_run_scan(const std::vector<double>& slope, long from, long limit,
                           int step, double thr, long run_min) {
  long run = 0;
  for (long i = from; step > 0 ? i <= limit : i >= limit; i += step) {
    if (std::fabs(slope[static_cast<std::size_t>(i)]) < thr) {
      if (++run >= run_min) return i - step * (run_min - 1);
    } else {
      run = 0;
    }
  }
  return kNoFiducial;
}

// Nearest index to `from` where |w - base| falls to `level` and stays there
// briefly; used for P-wave boundaries.
inline long amplitude_fall_scan(const std::vector<double>& w, double base, long from,
                                long limit, int step, double level, long run_min) {
  long run = 0;
  for (long i = from; step > 0 ? i <= limit : i >= limit; i += step) {
    if (std::fabs(w[static_cast<std::size_t>(i)] - base) <= level) {
      if (++run >= run_min) return i - step * (run_min - 1);
    } else {
      run = 0;
    }
  }
  return kNoFiducial;
}

}  // namespace detail

inline FiducialSet delineate(const std::vector<double>& x, const PeakList& peaks,
                             double fs, const std::string& lead_name = "") {
  if (peaks.size() < 2) throw TooFewBeats("delineation needs at least 2 beats");
  const auto w = delineation_signal(x, fs);
  const auto slope = slope_per_ms(w, fs);
  const long n = static_cast<long>(w.size());

  auto ms = [fs](double v) { return static_cast<long>(std::lround(v * fs / 1000.0)); };
  const long run_min = std::max<long>(2, ms(8.0));

  FiducialSet set;
  set.lead = lead_name;
  set.fs = fs;

  // The previous beat's T offset bounds the P search; tracked internally so
  // it is known even when the previous beat is a boundary beat.
  long prev_t_off = kNoFiducial;

  for (std::size_t k = 0; k < peaks.indices.size(); ++k) {
    FiducialBeat beat;
    beat.boundary = (k == 0 || k + 1 == peaks.indices.size());
    long r = static_cast<long>(peaks.indices[k]);

    // Rough local baseline, robust to the beat itself.
    const long med_lo = std::max<long>(0, r - ms(250.0));
    const long med_hi = std::min<long>(n - 1, r + ms(250.0));
    std::vector<double> patch(w.begin() + med_lo, w.begin() + med_hi + 1);
    const double rough = median_of(std::move(patch));

    // Snap R to the sharpest deviation nearby; detector peaks sit on their
    // own band-passed signal and can be a few samples off the raw apex.
    {
      const long lo = std::max<long>(0, r - ms(25.0));
      const long hi = std::min<long>(n - 1, r + ms(25.0));
      long best = r;
      for (long i = lo; i <= hi; ++i)
        if (std::fabs(w[static_cast<std::size_t>(i)] - rough) >
            std::fabs(w[static_cast<std::size_t>(best)] - rough))
          best = i;
      r = best;
    }
    beat.r = r;
    const double r_dev = w[static_cast<std::size_t>(r)] - rough;
    const double sgn_r = r_dev >= 0 ? 1.0 : -1.0;

    // QRS bounds by slope threshold.
    const long qrs_lo = std::max<long>(0, r - ms(80.0));
    const long qrs_hi = std::min<long>(n - 1, r + ms(80.0));
    double max_slope = 0.0;
    for (long i = qrs_lo; i <= qrs_hi; ++i)
      max_slope = std::max(max_slope, std::fabs(slope[static_cast<std::size_t>(i)]));
    if (max_slope > 0.0) {
      const double thr = 0.05 * max_slope;
      beat.qrs_on = detail::quiet_run_scan(slope, r - 1, qrs_lo, -1, thr, run_min);
      beat.j = detail::quiet_run_scan(slope, r + 1, qrs_hi, +1, thr, run_min);
    }

    // Q and S: opposite-polarity extrema inside the QRS bounds.
    const double q_floor = std::max(8.0, 0.02 * std::fabs(r_dev));
    if (beat.qrs_on != kNoFiducial) {
      long best = kNoFiducial;
      double best_dev = -q_floor;
      for (long i = beat.qrs_on; i < r; ++i) {
        const double dev = (w[static_cast<std::size_t>(i)] - rough) * sgn_r;
        if (dev < best_dev) {
          best_dev = dev;
          best = i;
        }
      }
      beat.q = best;
    }
    if (beat.j != kNoFiducial) {
      long best = kNoFiducial;
      double best_dev = -q_floor;
      for (long i = r + 1; i <= beat.j; ++i) {
        const double dev = (w[static_cast<std::size_t>(i)] - rough) * sgn_r;
        if (dev < best_dev) {
          best_dev = dev;
          best = i;
        }
      }
      beat.s = best;
    }

    if (beat.qrs_on != kNoFiducial) {
      // P wave inside [qrs_on - 250 ms, qrs_on - 50 ms], never reaching back
      // into the preceding T wave.
      long p_lo = std::max<long>(0, beat.qrs_on - ms(250.0));
      if (prev_t_off != kNoFiducial) p_lo = std::max(p_lo, prev_t_off + ms(15.0));
      const long p_hi = std::max<long>(0, beat.qrs_on - ms(50.0));
      if (p_hi > p_lo + run_min) {
        double base_pr = 0.0;
        long cnt = 0;
        for (long i = std::max<long>(0, beat.qrs_on - ms(35.0));
             i <= std::max<long>(0, beat.qrs_on - ms(5.0)); ++i, ++cnt)
          base_pr += w[static_cast<std::size_t>(i)];
        base_pr = cnt ? base_pr / static_cast<double>(cnt) : rough;

        long p_peak = p_lo;
        for (long i = p_lo; i <= p_hi; ++i)
          if (std::fabs(w[static_cast<std::size_t>(i)] - base_pr) >
              std::fabs(w[static_cast<std::size_t>(p_peak)] - base_pr))
            p_peak = i;
        const double p_dev = std::fabs(w[static_cast<std::size_t>(p_peak)] - base_pr);
        if (p_dev >= std::max(15.0, 0.04 * std::fabs(r_dev))) {
          beat.p_peak = p_peak;
          const double level = std::exp(-2.0) * p_dev;  // 2-sigma crossing
          const long edge_run = std::max<long>(2, ms(4.0));
          // The peak lives in the pinned window; its boundaries may fall a
          // little closer to the QRS at high heart rates.
          const long p_edge_hi = std::max<long>(p_hi, beat.qrs_on - ms(20.0));
          beat.p_on = detail::amplitude_fall_scan(w, base_pr, p_peak - 1, p_lo, -1, level,
                                                  edge_run);
          beat.p_off = detail::amplitude_fall_scan(w, base_pr, p_peak + 1, p_edge_hi, +1,
                                                   level, edge_run);
        }
      }
    }

    // Isoelectric baseline from the PR segment.
    {
      long b_lo = beat.p_off != kNoFiducial
                      ? beat.p_off
                      : (beat.qrs_on != kNoFiducial ? beat.qrs_on - ms(40.0) : r - ms(120.0));
      long b_hi = beat.qrs_on != kNoFiducial ? beat.qrs_on - ms(2.0) : r - ms(60.0);
      b_lo = std::max<long>(0, b_lo);
      b_hi = std::min<long>(n - 1, std::max(b_lo, b_hi));
      double acc = 0.0;
      long cnt = 0;
      for (long i = b_lo; i <= b_hi; ++i, ++cnt) acc += w[static_cast<std::size_t>(i)];
      beat.baseline_uv = cnt ? acc / static_cast<double>(cnt) : rough;
    }

    if (beat.j != kNoFiducial && k + 1 < peaks.indices.size()) {
      // T wave between J and the RR-adaptive window end.
      const double rr_ms =
          (static_cast<double>(peaks.indices[k + 1]) - static_cast<double>(r)) * 1000.0 / fs;
      const long t_lo = std::min(n - 1, beat.j + ms(20.0));
      const long t_hi = std::min<long>(n - 1, beat.j + ms(std::min(400.0, 0.6 * rr_ms)));
      if (t_hi > t_lo + run_min) {
        const double base = beat.baseline_uv;
        long t_peak = t_lo;
        for (long i = t_lo; i <= t_hi; ++i)
          if (std::fabs(w[static_cast<std::size_t>(i)] - base) >
              std::fabs(w[static_cast<std::size_t>(t_peak)] - base))
            t_peak = i;
        const double t_dev = std::fabs(w[static_cast<std::size_t>(t_peak)] - base);
        if (t_dev >= std::max(20.0, 0.05 * std::fabs(r_dev))) {
          beat.t_peak = t_peak;
          const double sgn_t =
              (w[static_cast<std::size_t>(t_peak)] - base) >= 0 ? 1.0 : -1.0;
          // Steepest downslope after the peak; tangent to baseline.
          long m = kNoFiducial;
          double steepest = 0.0;
          for (long i = t_peak; i <= t_hi; ++i) {
            const double down = -sgn_t * slope[static_cast<std::size_t>(i)];
            if (down > steepest) {
              steepest = down;
              m = i;
            }
          }
          if (m != kNoFiducial && steepest > 0.0) {
            const double dev_m =
                (w[static_cast<std::size_t>(m)] - base) * sgn_t;  // microvolts
            const long t_off =
                m + static_cast<long>(std::lround(dev_m / steepest * fs / 1000.0));
            const long next_r = static_cast<long>(peaks.indices[k + 1]);
            if (t_off > t_peak && t_off < next_r - ms(100.0) && t_off < n)
              beat.t_off = t_off;
          }
        }
      }
    }

    prev_t_off = beat.t_off;
    if (beat.boundary) {
      // Boundary beats expose QRS fiducials only; P/T were still computed so
      // the next beat's P search window is bounded correctly.
      beat.p_on = beat.p_peak = beat.p_off = kNoFiducial;
      beat.t_peak = beat.t_off = kNoFiducial;
    }
    set.beats.push_back(beat);
  }
  return set;
}

}  // namespace afrkit
