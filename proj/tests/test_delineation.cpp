#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "afrkit/delineation.hpp"
#include "afrkit/qrs.hpp"
#include "afrkit/synth.hpp"

using namespace afrkit;

namespace {

struct DelinResult {
  FiducialSet fid;
  GroundTruth truth;
  double fs;
};

DelinResult delineate_synth(SynthSpec spec, std::size_t lead = 1) {
  auto [rec, truth] = generate(spec);
  const PeakList peaks = detect_energy(rec.samples[lead], rec.fs);
  return {delineate(rec.samples[lead], peaks, rec.fs, rec.leads[lead]), truth, rec.fs};
}

// Find the truth beat matching a detected beat's R position (within 100 ms).
const BeatTruth* truth_for(const GroundTruth& truth, long r, double fs) {
  const double t = static_cast<double>(r) / fs;
  for (const auto& b : truth.beats)
    if (std::fabs(b.r_time_s - t) < 0.1) return &b;
  return nullptr;
}

double ms_between(long idx, double truth_s, double fs) {
  return std::fabs(static_cast<double>(idx) / fs - truth_s) * 1000.0;
}

}  // namespace

TEST_CASE("fiducials land within 20 ms of the template ground truth") {
  SynthSpec spec;
  spec.duration_s = 30.0;
  spec.fs = 500.0;
  spec.hr_bpm = 62.0;
  spec.noise_uv = 2.0;
  auto res = delineate_synth(spec);

  std::size_t checked = 0;
  for (const auto& beat : res.fid.beats) {
    if (beat.boundary || !beat.complete()) continue;
    const BeatTruth* bt = truth_for(res.truth, beat.r, res.fs);
    REQUIRE(bt != nullptr);
    CHECK(ms_between(beat.p_on, bt->p_on_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.p_peak, bt->p_peak_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.p_off, bt->p_off_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.qrs_on, bt->qrs_on_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.q, bt->q_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.r, bt->r_time_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.s, bt->s_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.j, bt->j_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.t_peak, bt->t_peak_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.t_off, bt->t_off_s, res.fs) <= 20.0);
    ++checked;
  }
  REQUIRE(checked >= 25);
}

TEST_CASE("absent P wave leaves P fiducials missing but QRS and T present") {
  SynthSpec spec;
  spec.duration_s = 20.0;
  spec.fs = 500.0;
  spec.p.amp_uv = 0.0;
  auto res = delineate_synth(spec);
  std::size_t interior = 0;
  for (const auto& beat : res.fid.beats) {
    if (beat.boundary) continue;
    ++interior;
    REQUIRE(beat.p_on == kNoFiducial);
    REQUIRE(beat.p_peak == kNoFiducial);
    REQUIRE(beat.p_off == kNoFiducial);
    REQUIRE(beat.qrs_on != kNoFiducial);
    REQUIRE(beat.j != kNoFiducial);
    REQUIRE(beat.t_peak != kNoFiducial);
    REQUIRE(beat.t_off != kNoFiducial);
  }
  REQUIRE(interior >= 15);
}

TEST_CASE("a single peak is too few beats") {
  SynthSpec spec;
  spec.duration_s = 4.0;
  spec.fs = 500.0;
  auto [rec, truth] = generate(spec);
  PeakList one;
  one.fs = rec.fs;
  one.indices = {1000};
  REQUIRE_THROWS_AS(delineate(rec.samples[1], one, rec.fs), TooFewBeats);
}

TEST_CASE("ordering invariant and >=95% completeness across the HR range") {
  for (double hr : {50.0, 70.0, 90.0, 110.0, 120.0}) {
    SynthSpec spec;
    spec.duration_s = 30.0;
    spec.fs = 500.0;
    spec.hr_bpm = hr;
    spec.hrv_std_ms = 15.0;
    spec.noise_uv = 3.0;
    spec.seed = static_cast<std::uint64_t>(hr);
    auto res = delineate_synth(spec);

    std::size_t interior = 0, complete = 0;
    for (const auto& beat : res.fid.beats) {
      REQUIRE(beat.ordered());
      if (beat.boundary) continue;
      ++interior;
      complete += beat.complete() ? 1 : 0;
    }
    INFO("hr=" << hr);
    REQUIRE(interior > 0);
    REQUIRE(static_cast<double>(complete) / static_cast<double>(interior) >= 0.95);
  }
}

TEST_CASE("boundary beats carry QRS fiducials only") {
  SynthSpec spec;
  spec.duration_s = 15.0;
  spec.fs = 500.0;
  auto res = delineate_synth(spec);
  REQUIRE(res.fid.beats.front().boundary);
  REQUIRE(res.fid.beats.back().boundary);
  for (const auto* beat : {&res.fid.beats.front(), &res.fid.beats.back()}) {
    REQUIRE(beat->r != kNoFiducial);
    REQUIRE(beat->qrs_on != kNoFiducial);
    REQUIRE(beat->j != kNoFiducial);
    REQUIRE(beat->p_peak == kNoFiducial);
    REQUIRE(beat->t_peak == kNoFiducial);
  }
}

TEST_CASE("delineation is deterministic") {
  SynthSpec spec;
  spec.duration_s = 20.0;
  spec.fs = 500.0;
  spec.noise_uv = 10.0;
  spec.hrv_std_ms = 30.0;
  auto [rec, truth] = generate(spec);
  const PeakList peaks = detect_energy(rec.samples[2], rec.fs);
  const FiducialSet a = delineate(rec.samples[2], peaks, rec.fs);
  const FiducialSet b = delineate(rec.samples[2], peaks, rec.fs);
  REQUIRE(a.beats.size() == b.beats.size());
  for (std::size_t i = 0; i < a.beats.size(); ++i) {
    REQUIRE(a.beats[i].r == b.beats[i].r);
    REQUIRE(a.beats[i].qrs_on == b.beats[i].qrs_on);
    REQUIRE(a.beats[i].t_off == b.beats[i].t_off);
  }
}

TEST_CASE("translation covariance: shifted signal shifts every fiducial") {
  SynthSpec spec;
  spec.duration_s = 16.0;
  spec.fs = 500.0;
  spec.noise_uv = 4.0;
  spec.seed = 88;
  auto [rec, truth] = generate(spec);
  const auto& x = rec.samples[1];
  const std::size_t shift = 450;
  const std::vector<double> cut(x.begin() + shift, x.end());

  const PeakList full_peaks = detect_energy(x, rec.fs);
  PeakList cut_peaks;
  cut_peaks.fs = rec.fs;
  for (std::size_t p : full_peaks.indices)
    if (p >= shift + 500) cut_peaks.indices.push_back(p - shift);
  REQUIRE(cut_peaks.size() >= 4);

  const FiducialSet full = delineate(x, full_peaks, rec.fs);
  const FiducialSet moved = delineate(cut, cut_peaks, rec.fs);

  // align on matching R positions; compare interior beats only
  std::size_t compared = 0;
  for (std::size_t i = 1; i + 1 < moved.beats.size(); ++i) {
    const long r_orig = moved.beats[i].r + static_cast<long>(shift);
    for (std::size_t j = 1; j + 1 < full.beats.size(); ++j) {
      if (full.beats[j].r != r_orig) continue;
      auto same = [&](long a, long b) {
        if (a == kNoFiducial || b == kNoFiducial) return a == b;
        return std::abs((a + static_cast<long>(shift)) - b) <= 1;
      };
      REQUIRE(same(moved.beats[i].qrs_on, full.beats[j].qrs_on));
      REQUIRE(same(moved.beats[i].j, full.beats[j].j));
      REQUIRE(same(moved.beats[i].t_peak, full.beats[j].t_peak));
      REQUIRE(same(moved.beats[i].p_peak, full.beats[j].p_peak));
      ++compared;
    }
  }
  REQUIRE(compared >= 3);
}

TEST_CASE("inverted leads delineate the same fiducial times") {
  SynthSpec spec;
  spec.duration_s = 20.0;
  spec.fs = 500.0;
  spec.noise_uv = 2.0;
  const std::size_t avr = 3;  // negative lead scale
  auto res = delineate_synth(spec, avr);
  std::size_t complete = 0, interior = 0;
  for (const auto& beat : res.fid.beats) {
    REQUIRE(beat.ordered());
    if (beat.boundary) continue;
    ++interior;
    if (!beat.complete()) continue;
    ++complete;
    const BeatTruth* bt = truth_for(res.truth, beat.r, res.fs);
    REQUIRE(bt != nullptr);
    CHECK(ms_between(beat.qrs_on, bt->qrs_on_s, res.fs) <= 20.0);
    CHECK(ms_between(beat.t_off, bt->t_off_s, res.fs) <= 20.0);
  }
  REQUIRE(interior > 0);
  REQUIRE(static_cast<double>(complete) / static_cast<double>(interior) >= 0.95);
}
