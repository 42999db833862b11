// Acceptance suite: one gate per release criterion, each printed as a
// PASS/FAIL line. Runs everything end to end on synthetic cohorts — no
// clinical data involved. Exit code is the number of failed gates.
//
//   1  feature-count audit + end-to-end runtime bound
//   2  quality-index oracle: clean floor, noise-driven exclusion
//   3  detector sensitivity/precision across the heart-rate range
//   4  biomarker agreement with generator ground truth
//   5  statistics oracle: t-test quadrature, volcano predicate, planted medHR
//   6  AUROC equals brute-force pairwise concordance
//   7  nested-CV planted signal vs permuted-label null
//   8  protocol shape: 8x8 folds, k=5 selection, mean-of-folds score
//   9  byte-identical artifacts for a fixed seed

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "afrkit/pipeline.hpp"
#include "support/cohorts.hpp"
#include "support/oracles.hpp"

using namespace afrkit;
namespace fs = std::filesystem;

namespace {

struct Gate {
  std::string name;
  std::function<void()> body;
};

struct GateFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw GateFailure(what);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path work_root() {
  static const fs::path root =
      fs::temp_directory_path() / ("afrkit_acceptance_" + std::to_string(::getpid()));
  return root;
}

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared across gates: the 20-patient cohort and its pipeline outputs.
struct Shared {
  std::string cohort_dir;
  std::string out_dir;
  PipelineConfig config;
  CvReport planted_report;
  bool planted_ready = false;
} shared;

StageContext context(const std::string& manifest, const std::string& out,
                     const PipelineConfig& cfg) {
  StageContext ctx;
  ctx.manifest_path = manifest;
  ctx.out_dir = out;
  ctx.config = cfg;
  return ctx;
}

// ---------------------------------------------------------------------------

void gate1_feature_count_and_runtime() {
  shared.cohort_dir = (work_root() / "cohort20").string();
  shared.out_dir = (work_root() / "out20").string();

  CohortSpec spec;
  spec.n_patients = 20;
  spec.duration_s = 600.0;  // 10-minute recordings
  spec.fs = 500.0;
  spec.noise_uv = 5.0;
  spec.wander_uv = 30.0;
  spec.hr_lo = 62.0;
  spec.hr_hi = 92.0;
  spec.label_fraction = 0.5;
  spec.seed = 2026;
  make_synth_cohort(spec, shared.cohort_dir);

  shared.config = PipelineConfig{};
  shared.config.seed = 11;
  shared.config.cv.seed = 11;

  const auto t0 = std::chrono::steady_clock::now();
  StageContext ctx = context(shared.cohort_dir + "/manifest.csv", shared.out_dir,
                             shared.config);
  run_features(ctx);
  const double secs = elapsed_s(t0);

  for (const char* name : {"features_stat_pre.csv", "features_stat_post.csv",
                           "features_ml_pre.csv", "features_ml_post.csv"}) {
    const CsvTable t = read_csv(ctx.path(name));
    std::size_t ecg_cols = 0;
    for (const auto& col : ecg_feature_names())
      ecg_cols += t.column(col) >= 0 ? 1 : 0;
    expect(ecg_cols == 804, std::string(name) + ": expected 804 ECG columns, found " +
                                std::to_string(ecg_cols));
    expect(t.column("age") >= 0 && t.column("sex") >= 0,
           std::string(name) + ": META columns missing");
  }
  const CsvTable ml_post = read_csv(ctx.path("features_ml_post.csv"));
  expect(ml_post.rows.size() == 100, "expected 20 patients x 5 segments, found " +
                                         std::to_string(ml_post.rows.size()));
  expect(secs < 120.0,
         "ingest+segments+features took " + std::to_string(secs) + " s (budget 120 s)");
  std::printf("        (20 patients x 10 min in %.1f s)\n", secs);
}

void gate2_bsqi_oracle() {
  // clean floor: every window of a clean recording scores >= 0.95
  SynthSpec clean;
  clean.duration_s = 300.0;
  clean.fs = 500.0;
  clean.hr_bpm = 66.0;
  clean.hrv_std_ms = 25.0;
  clean.seed = 31;
  auto [rec, truth] = generate(clean);
  for (const auto& seg : scan(rec, 10.0))
    expect(seg.bsqi_mean >= 0.95, "clean window at " + std::to_string(seg.start_s) +
                                      " s scored " + std::to_string(seg.bsqi_mean));

  // white noise at SNR <= 0 dB (-12 dB here) must force exclusion in >= 19/20
  const double snr_db = -12.0;
  int excluded = 0;
  for (int trial = 0; trial < 20; ++trial) {
    SynthSpec spec;
    spec.duration_s = 60.0;
    spec.fs = 500.0;
    spec.hr_bpm = 58.0 + 3.0 * trial;
    spec.hrv_std_ms = 20.0;
    spec.seed = 400 + static_cast<std::uint64_t>(trial);
    auto [noisy, nt] = generate(spec);
    Rng noise_rng(900 + static_cast<std::uint64_t>(trial));
    for (auto& lead : noisy.samples) {
      double ss = 0.0;
      for (double v : lead) ss += v * v;
      const double sigma =
          std::sqrt(ss / static_cast<double>(lead.size())) * std::pow(10.0, -snr_db / 20.0);
      for (double& v : lead) v += noise_rng.normal(0.0, sigma);
    }
    const auto segs = scan(noisy, 10.0);
    double best = 0.0;
    for (const auto& s : segs) best = std::max(best, s.bsqi_mean);
    if (best < 0.8 && select(segs, 5, 0.8).empty()) ++excluded;
  }
  expect(excluded >= 19, "noise exclusion in only " + std::to_string(excluded) +
                             "/20 trials at -12 dB");
}

void gate3_detector_accuracy() {
  std::size_t truth_total_a = 0, match_a = 0, det_a = 0;
  std::size_t truth_total_b = 0, match_b = 0, det_b = 0;
  for (double hr : {50.0, 64.0, 78.0, 92.0, 106.0, 120.0}) {
    for (int rep = 0; rep < 3; ++rep) {
      SynthSpec spec;
      spec.duration_s = 60.0;
      spec.fs = 500.0;
      spec.hr_bpm = hr;
      spec.hrv_std_ms = 20.0;
      spec.seed = static_cast<std::uint64_t>(hr) * 10 + static_cast<std::uint64_t>(rep);
      auto [rec, truth] = generate(spec);

      PeakList truth_peaks;
      truth_peaks.fs = rec.fs;
      for (const auto& b : truth.beats) {
        if (b.r_time_s < 0.25 || b.r_time_s > spec.duration_s - 0.25) continue;
        truth_peaks.indices.push_back(
            static_cast<std::size_t>(std::lround(b.r_time_s * rec.fs)));
      }
      for (std::size_t lead = 0; lead < kNumLeads; ++lead) {
        const PeakList a = detect_energy(rec.samples[lead], rec.fs);
        const PeakList b = detect_filterbank(rec.samples[lead], rec.fs);
        const MatchCounts ma = match_peaks(truth_peaks, a, 150.0);
        const MatchCounts mb = match_peaks(truth_peaks, b, 150.0);
        truth_total_a += ma.n_a;
        match_a += ma.n_match;
        det_a += ma.n_b;
        truth_total_b += mb.n_a;
        match_b += mb.n_match;
        det_b += mb.n_b;
      }
    }
  }
  const double sens_a = static_cast<double>(match_a) / static_cast<double>(truth_total_a);
  const double prec_a = static_cast<double>(match_a) / static_cast<double>(det_a);
  const double sens_b = static_cast<double>(match_b) / static_cast<double>(truth_total_b);
  const double prec_b = static_cast<double>(match_b) / static_cast<double>(det_b);
  std::printf("        (energy: se=%.4f p+=%.4f; filterbank: se=%.4f p+=%.4f)\n", sens_a,
              prec_a, sens_b, prec_b);
  expect(sens_a >= 0.99 && prec_a >= 0.99,
         "energy detector below 0.99 (se=" + std::to_string(sens_a) +
             ", p+=" + std::to_string(prec_a) + ")");
  expect(sens_b >= 0.99 && prec_b >= 0.99,
         "filterbank detector below 0.99 (se=" + std::to_string(sens_b) +
             ", p+=" + std::to_string(prec_b) + ")");
}

void gate4_biomarker_truth() {
  double worst_qt = 0, worst_qrs = 0, worst_pr = 0, worst_rwave = 0;
  for (int seed = 0; seed < 20; ++seed) {
    SynthSpec spec;
    spec.duration_s = 90.0;
    spec.fs = 500.0;
    spec.hr_bpm = 55.0 + 2.3 * seed;
    spec.hrv_std_ms = 20.0;
    spec.noise_uv = 3.0;
    spec.wander_uv = 20.0;
    spec.seed = 700 + static_cast<std::uint64_t>(seed);
    auto [rec, truth] = generate(spec);

    std::vector<double> qt_t, qrs_t, pr_t;
    for (const auto& b : truth.beats) {
      qt_t.push_back(b.qt_ms);
      qrs_t.push_back(b.qrs_ms);
      pr_t.push_back(b.pr_ms);
    }
    const double qt_truth = median_of(qt_t);
    const double qrs_truth = median_of(qrs_t);
    const double pr_truth = median_of(pr_t);

    for (std::size_t lead = 0; lead < kNumLeads; ++lead) {
      const PeakList peaks = detect_energy(rec.samples[lead], rec.fs);
      const FiducialSet fid = delineate(rec.samples[lead], peaks, rec.fs);
      const auto agg = mor_aggregate(mor_beats(fid, rec.samples[lead], rec.fs));
      const double rwave_truth = truth.lead_scale[lead] * truth.r_amp_uv;

      const double dqt = std::fabs(agg.at("QT_int_med") - qt_truth);
      const double dqrs = std::fabs(agg.at("QRS_int_med") - qrs_truth);
      const double dpr = std::fabs(agg.at("PR_int_med") - pr_truth);
      const double drw = std::fabs(agg.at("Rwave_med") - rwave_truth) / std::fabs(rwave_truth);
      worst_qt = std::max(worst_qt, dqt);
      worst_qrs = std::max(worst_qrs, dqrs);
      worst_pr = std::max(worst_pr, dpr);
      worst_rwave = std::max(worst_rwave, drw);
      expect(!is_missing(agg.at("QT_int_med")), "QT_int_med missing");
      expect(dqt <= 20.0, "QT_int_med off by " + std::to_string(dqt) + " ms (seed " +
                              std::to_string(seed) + ", lead " + std::to_string(lead) + ")");
      expect(dqrs <= 20.0, "QRS_int_med off by " + std::to_string(dqrs) + " ms");
      expect(dpr <= 20.0, "PR_int_med off by " + std::to_string(dpr) + " ms");
      expect(drw <= 0.10, "Rwave_med off by " + std::to_string(100.0 * drw) + "%");
    }
  }
  std::printf("        (worst: QT %.1f ms, QRS %.1f ms, PR %.1f ms, Rwave %.1f%%)\n",
              worst_qt, worst_qrs, worst_pr, 100.0 * worst_rwave);
}

void gate5_statistics_oracle() {
  // (a) paired t-test against the quadrature oracle
  oracles::TestRng rng(6060);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 15));
    std::vector<double> pre(static_cast<std::size_t>(n)), post(static_cast<std::size_t>(n));
    for (auto& v : pre) v = rng.uniform(-4.0, 4.0);
    for (std::size_t i = 0; i < post.size(); ++i) post[i] = pre[i] + rng.uniform(-1.5, 1.5);
    const PairedTResult r = paired_ttest(pre, post);
    if (r.degenerate) continue;
    const double oracle =
        oracles::t_two_sided_p_quadrature(r.t, static_cast<double>(r.n) - 1.0);
    expect(std::fabs(r.p - oracle) <= 1e-8,
           "t-test p off oracle by " + std::to_string(std::fabs(r.p - oracle)));
  }

  // (b)+(c) planted +20 bpm post shift on a small cohort, literal FC rule
  const std::string cohort_dir = (work_root() / "cohort_hr").string();
  const std::string out_dir = (work_root() / "out_hr").string();
  CohortSpec spec;
  spec.n_patients = 8;
  spec.duration_s = 620.0;
  spec.fs = 500.0;
  spec.noise_uv = 4.0;
  spec.wander_uv = 20.0;
  spec.hr_lo = 68.0;
  spec.hr_hi = 80.0;
  spec.post_hr_shift_bpm = 20.0;
  spec.seed = 55;
  make_synth_cohort(spec, cohort_dir);

  PipelineConfig cfg;
  cfg.seed = 5;
  cfg.cv.seed = 5;
  cfg.volcano.fc_mode = FcMode::Raw;  // the published |mean FC| > 1 rule
  StageContext ctx = context(cohort_dir + "/manifest.csv", out_dir, cfg);
  run_stats(ctx);

  const CsvTable volcano_csv = read_csv(ctx.path("volcano.csv"));
  const int c_feat = volcano_csv.column("feature"), c_p = volcano_csv.column("p_value"),
            c_fc = volcano_csv.column("mean_fc"), c_l2 = volcano_csv.column("log2_fc"),
            c_sig = volcano_csv.column("significant");
  std::size_t medhr_rows = 0;
  for (const auto& row : volcano_csv.rows) {
    const std::string feat = row[static_cast<std::size_t>(c_feat)];
    const double p = parse_double_or_missing(row[static_cast<std::size_t>(c_p)]);
    const double fc = parse_double_or_missing(row[static_cast<std::size_t>(c_fc)]);
    const bool sig = row[static_cast<std::size_t>(c_sig)] == "1";

    // every row satisfies the defining predicate of the configured mode
    if (!is_missing(fc) && !is_missing(p)) {
      const bool predicate = p < 0.05 && std::fabs(fc) > 1.0;
      expect(sig == predicate || is_missing(fc),
             "volcano flag mismatch on " + feat);
    }
    if (feat.size() > 6 && feat.substr(feat.size() - 6) == "_medHR") {
      ++medhr_rows;
      const double l2 = parse_double_or_missing(row[static_cast<std::size_t>(c_l2)]);
      expect(sig, "planted +20 bpm shift did not flag " + feat);
      expect(l2 > 0, feat + " flagged with non-positive fold change");
    }
  }
  expect(medhr_rows == 12, "expected 12 medHR rows, found " + std::to_string(medhr_rows));
}

void gate6_auroc_oracle() {
  oracles::TestRng rng(4444);
  int checked = 0;
  while (checked < 300) {
    const int n = static_cast<int>(rng.uniform_int(2, 20));
    std::vector<double> scores;
    std::vector<int> labels;
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      scores.push_back(std::round(rng.uniform() * 6.0) / 6.0);  // force ties
      labels.push_back(rng.uniform() < 0.5 ? 0 : 1);
      (labels.back() ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    ++checked;
    const double lib = roc_auc(scores, labels).auroc;
    const double brute = oracles::auc_brute_force(scores, labels);
    expect(std::fabs(lib - brute) <= 1e-12,
           "AUROC " + std::to_string(lib) + " vs brute " + std::to_string(brute));
  }
}

void gate7_nested_cv() {
  // planted signal, full search space and budget
  cohorts::PlantedSpec spec;
  spec.n_patients = 45;
  spec.n_noise_features = 64;
  spec.segments_per_patient = 5;
  spec.delta = 3.0;
  spec.seed = 7;
  const CohortTable cohort = cohorts::planted_cohort(spec);

  NestedCvConfig cfg;
  cfg.budget = 50;
  cfg.seed = 7;
  const auto t0 = std::chrono::steady_clock::now();
  shared.planted_report = nested_cv(cohort, cfg);
  const double secs = elapsed_s(t0);
  shared.planted_ready = true;
  std::printf("        (planted run: mean AUROC %.3f in %.1f s)\n",
              shared.planted_report.mean_auroc, secs);

  expect(secs <= 600.0, "planted nested CV took " + std::to_string(secs) + " s");
  expect(shared.planted_report.mean_auroc >= 0.9,
         "planted mean AUROC " + std::to_string(shared.planted_report.mean_auroc));
  std::size_t hits = 0;
  for (const auto& fr : shared.planted_report.folds) {
    if (fr.skipped) continue;
    for (const auto& name : fr.selected_features)
      if (name == "planted_signal") {
        ++hits;
        break;
      }
  }
  expect(hits >= 6, "planted feature selected in only " + std::to_string(hits) + "/8 folds");

  // permuted-label null over 20 seeds
  double acc = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    cohorts::PlantedSpec null_spec;
    null_spec.n_patients = 24;
    null_spec.n_noise_features = 16;
    null_spec.segments_per_patient = 3;
    null_spec.permute_labels = true;
    null_spec.seed = 300 + static_cast<std::uint64_t>(rep);
    NestedCvConfig null_cfg;
    null_cfg.budget = 10;
    null_cfg.seed = 800 + static_cast<std::uint64_t>(rep);
    null_cfg.space.n_trees_hi = 120;
    acc += nested_cv(cohorts::planted_cohort(null_spec), null_cfg).mean_auroc;
  }
  const double null_mean = acc / 20.0;
  std::printf("        (permuted-label mean AUROC over 20 seeds: %.3f)\n", null_mean);
  expect(null_mean >= 0.35 && null_mean <= 0.65,
         "null mean AUROC " + std::to_string(null_mean) + " outside [0.35, 0.65]");
}

void gate8_protocol_shape() {
  expect(shared.planted_ready, "gate 7 must run first");
  const CvReport& r = shared.planted_report;
  expect(r.folds.size() == 8, "expected 8 outer folds");
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& fr : r.folds) {
    if (fr.skipped) continue;
    expect(fr.n_inner_folds == 8, "expected 8 inner folds");
    expect(fr.n_evaluations == 50, "expected 50 search evaluations");
    acc += fr.auroc;
    ++n;
  }
  expect(n > 0, "no scored folds");
  expect(std::fabs(r.mean_auroc - acc / static_cast<double>(n)) < 1e-12,
         "reported score is not the arithmetic mean of fold AUROCs");

  // mRMR with k=5 returns exactly 5 features
  oracles::TestRng rng(88);
  Matrix X;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> row;
    for (int f = 0; f < 30; ++f) row.push_back(rng.normal());
    X.push_back(row);
    y.push_back(i % 2);
  }
  expect(mrmr_select(X, y, 5).size() == 5, "mRMR k=5 did not return 5 features");
}

void gate9_determinism() {
  // identical seeds, two fresh runs: every artifact byte-identical
  const std::string out_a = (work_root() / "det_a").string();
  const std::string out_b = (work_root() / "det_b").string();
  PipelineConfig cfg = shared.config;
  cfg.cv.budget = 10;
  cfg.cv.space.n_trees_hi = 120;

  for (const std::string& out : {out_a, out_b}) {
    StageContext ctx = context(shared.cohort_dir + "/manifest.csv", out, cfg);
    run_stats(ctx);
    run_train(ctx, "post", FeatureSet::MetaEcg);
    run_report(ctx);
  }
  for (const char* name :
       {"ingest_report.csv", "segments.csv", "exclusions.csv", "features_stat_pre.csv",
        "features_stat_post.csv", "features_ml_pre.csv", "features_ml_post.csv",
        "volcano.csv", "volcano_supplementary.csv", "cv_report_post_meta_ecg.json",
        "roc_post_meta_ecg.csv", "exclusion_report.csv"}) {
    const std::string a = slurp(out_a + "/" + name);
    const std::string b = slurp(out_b + "/" + name);
    expect(!a.empty(), std::string(name) + " is empty");
    expect(a == b, std::string(name) + " differs between same-seed runs");
  }
}

}  // namespace

int main() {
  fs::remove_all(work_root());
  fs::create_directories(work_root());

  const std::vector<Gate> gates = {
      {"1 feature-count audit (804 ECG columns) and runtime bound", gate1_feature_count_and_runtime},
      {"2 bSQI oracle: clean floor >= 0.95, noise exclusion >= 19/20", gate2_bsqi_oracle},
      {"3 detector sensitivity/precision >= 0.99 over HR 50-120", gate3_detector_accuracy},
      {"4 biomarkers within 20 ms / 10% of ground truth (20 cohorts)", gate4_biomarker_truth},
      {"5 statistics oracle: t-test, volcano predicate, planted medHR", gate5_statistics_oracle},
      {"6 AUROC equals brute-force concordance (ties = 1/2)", gate6_auroc_oracle},
      {"7 nested CV: planted >= 0.9, permuted null in [0.35, 0.65]", gate7_nested_cv},
      {"8 protocol shape: 8x8 folds, 50 evals, k=5, mean-of-folds", gate8_protocol_shape},
      {"9 determinism: same seed, byte-identical artifacts", gate9_determinism},
  };

  int failures = 0;
  for (const auto& gate : gates) {
    try {
      gate.body();
      std::printf("PASS  criterion %s\n", gate.name.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("FAIL  criterion %s\n      %s\n", gate.name.c_str(), e.what());
    }
    std::fflush(stdout);
  }
  fs::remove_all(work_root());
  if (failures == 0) std::printf("acceptance: all %zu criteria passed\n", gates.size());
  else std::printf("acceptance: %d criteria FAILED\n", failures);
  return failures;
}
