#pragma once

// Deterministic synthetic 12-lead ECG generator. Beats are sums of Gaussian
// waves (P, Q, R, S, T) repeated at seeded RR intervals, with a per-lead
// amplitude profile, optional white noise and baseline wander, quantized to
// the amplitude grid. Wave boundaries are defined at +-2 sigma, which makes
// the analytic ground truth line up with slope/tangent delineation rules:
// the tangent construction on a Gaussian flank lands exactly at 2 sigma.
//
// P and T timing/width scale with sqrt(RR) so templates stay physiological
// across the supported heart-rate range.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/recordio.hpp"

namespace afrkit {

struct WaveSpec {
  double amp_uv = 0;     // peak amplitude before per-lead scaling
  double center_ms = 0;  // offset from the R center
  double sigma_ms = 1;   // Gaussian width
};

struct SynthSpec {
  std::string patient_id = "synth";
  double hr_bpm = 60.0;
  double hrv_std_ms = 0.0;
  double noise_uv = 0.0;            // white noise RMS per lead
  double wander_uv = 0.0;           // baseline wander amplitude
  double wander_hz = 0.25;
  double duration_s = 60.0;
  double fs = 500.0;
  double quant = 0.03;
  std::uint64_t seed = 1;

  WaveSpec p{120.0, -170.0, 22.0};
  WaveSpec q{-120.0, -28.0, 7.0};
  WaveSpec r{1000.0, 0.0, 9.0};
  WaveSpec s{-180.0, 30.0, 7.0};
  WaveSpec t{330.0, 270.0, 55.0};

  // Rough 12-lead projection; aVR is inverted as in the standard montage.
  std::array<double, kNumLeads> lead_scale = {0.6,  1.0,  0.5, -0.55, 0.35, 0.75,
                                              0.45, 0.9,  1.1, 1.05,  0.95, 0.8};

  void validate() const {
    if (hr_bpm < 30.0 || hr_bpm > 220.0) throw ConfigError("hr_bpm outside [30, 220]");
    if (fs < 250.0) throw ConfigError("fs must be >= 250 Hz");
    if (duration_s <= 0) throw ConfigError("duration must be positive");
    for (const WaveSpec* w : {&p, &q, &r, &s, &t})
      if (w->sigma_ms <= 0) throw ConfigError("wave widths must be positive");
  }
};

// Per-beat truth. Fiducial times are absolute seconds; intervals are the
// biomarker values a perfect delineator would recover.
struct BeatTruth {
  double r_time_s = 0;
  double rr_ms = 0;      // to the next beat (nominal RR for the last beat)
  double p_on_s = 0, p_peak_s = 0, p_off_s = 0;
  double qrs_on_s = 0, q_s = 0, s_s = 0, j_s = 0;
  double t_peak_s = 0, t_off_s = 0;
  double pr_ms = 0, qrs_ms = 0, qt_ms = 0, pwave_ms = 0;
};

struct GroundTruth {
  std::vector<BeatTruth> beats;
  std::array<double, kNumLeads> lead_scale{};
  double r_amp_uv = 0;  // base R amplitude; per-lead truth = lead_scale * r_amp_uv
  double p_amp_uv = 0;
  double t_amp_uv = 0;
};

namespace detail {

inline void add_gaussian(std::vector<double>& lead, double fs, double center_s,
                         double amp, double sigma_ms) {
  const double sigma_s = sigma_ms / 1000.0;
  const long lo = std::max(0L, static_cast<long>(std::floor((center_s - 4.5 * sigma_s) * fs)));
  const long hi = std::min(static_cast<long>(lead.size()) - 1,
                           static_cast<long>(std::ceil((center_s + 4.5 * sigma_s) * fs)));
  for (long i = lo; i <= hi; ++i) {
    const double t = static_cast<double>(i) / fs - center_s;
    lead[static_cast<std::size_t>(i)] += amp * std::exp(-t * t / (2.0 * sigma_s * sigma_s));
  }
}

}  // namespace detail

inline std::pair<Recording, GroundTruth> generate(const SynthSpec& spec) {
  spec.validate();
  const double fs = spec.fs;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * fs));

  Recording rec;
  rec.patient_id = spec.patient_id;
  rec.fs = fs;
  rec.quant = spec.quant;
  rec.samples.assign(kNumLeads, std::vector<double>(n, 0.0));

  GroundTruth truth;
  truth.lead_scale = spec.lead_scale;
  truth.r_amp_uv = spec.r.amp_uv;
  truth.p_amp_uv = spec.p.amp_uv;
  truth.t_amp_uv = spec.t.amp_uv;

  Rng master(spec.seed);
  Rng rr_rng = master.spawn(0);

  // Beat schedule. First beat leaves room for its P wave; the last leaves
  // room for its T wave.
  const double rr_nominal = 60000.0 / spec.hr_bpm;
  std::vector<double> beat_times;
  double t_beat = 0.4;
  while (t_beat <= spec.duration_s - 0.5) {
    beat_times.push_back(t_beat);
    double rr = rr_nominal + (spec.hrv_std_ms > 0 ? rr_rng.normal(0.0, spec.hrv_std_ms) : 0.0);
    rr = std::max(300.0, std::min(2500.0, rr));
    t_beat += rr / 1000.0;
  }

  for (std::size_t k = 0; k < beat_times.size(); ++k) {
    const double rt = beat_times[k];
    const double rr_ms = (k + 1 < beat_times.size())
                             ? (beat_times[k + 1] - rt) * 1000.0
                             : rr_nominal;
    // P/T stretch with sqrt(RR), QRS geometry stays fixed.
    const double stretch = std::clamp(std::sqrt(rr_ms / 1000.0), 0.7, 1.15);

    BeatTruth bt;
    bt.r_time_s = rt;
    bt.rr_ms = rr_ms;
    const double p_center = rt + stretch * spec.p.center_ms / 1000.0;
    const double p_sigma = stretch * spec.p.sigma_ms;
    const double t_center = rt + stretch * spec.t.center_ms / 1000.0;
    const double t_sigma = stretch * spec.t.sigma_ms;

    bt.p_peak_s = p_center;
    bt.p_on_s = p_center - 2.0 * p_sigma / 1000.0;
    bt.p_off_s = p_center + 2.0 * p_sigma / 1000.0;
    bt.qrs_on_s = rt + (spec.q.center_ms - 2.0 * spec.q.sigma_ms) / 1000.0;
    bt.q_s = rt + spec.q.center_ms / 1000.0;
    bt.s_s = rt + spec.s.center_ms / 1000.0;
    bt.j_s = rt + (spec.s.center_ms + 2.0 * spec.s.sigma_ms) / 1000.0;
    bt.t_peak_s = t_center;
    bt.t_off_s = t_center + 2.0 * t_sigma / 1000.0;
    bt.pwave_ms = (bt.p_off_s - bt.p_on_s) * 1000.0;
    bt.pr_ms = (bt.qrs_on_s - bt.p_on_s) * 1000.0;
    bt.qrs_ms = (bt.j_s - bt.qrs_on_s) * 1000.0;
    bt.qt_ms = (bt.t_off_s - bt.qrs_on_s) * 1000.0;
    truth.beats.push_back(bt);

    for (std::size_t l = 0; l < kNumLeads; ++l) {
      auto& lead = rec.samples[l];
      const double sc = spec.lead_scale[l];
      detail::add_gaussian(lead, fs, p_center, sc * spec.p.amp_uv, p_sigma);
      detail::add_gaussian(lead, fs, rt + spec.q.center_ms / 1000.0, sc * spec.q.amp_uv,
                           spec.q.sigma_ms);
      detail::add_gaussian(lead, fs, rt, sc * spec.r.amp_uv, spec.r.sigma_ms);
      detail::add_gaussian(lead, fs, rt + spec.s.center_ms / 1000.0, sc * spec.s.amp_uv,
                           spec.s.sigma_ms);
      detail::add_gaussian(lead, fs, t_center, sc * spec.t.amp_uv, t_sigma);
    }
  }

  for (std::size_t l = 0; l < kNumLeads; ++l) {
    auto& lead = rec.samples[l];
    Rng lead_rng = master.spawn(1 + l);
    if (spec.wander_uv > 0) {
      const double phase = lead_rng.uniform(0.0, 2.0 * M_PI);
      for (std::size_t i = 0; i < n; ++i)
        lead[i] += spec.wander_uv *
                   std::sin(2.0 * M_PI * spec.wander_hz * static_cast<double>(i) / fs + phase);
    }
    if (spec.noise_uv > 0)
      for (std::size_t i = 0; i < n; ++i) lead[i] += lead_rng.normal(0.0, spec.noise_uv);
    // Snap to the quantization grid (mirrors an ADC and makes the
    // flat-binary round trip exact).
    for (double& v : lead) v = std::llround(v / spec.quant) * spec.quant;
  }
  return {std::move(rec), std::move(truth)};
}

}  // namespace afrkit
