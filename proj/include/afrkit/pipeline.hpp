#pragma once

// End-to-end orchestration: configuration profile, the pipeline stages
// (ingest -> segments -> features -> stats / train -> report), synthetic
// cohort generation, and the artifact writers. Stages are idempotent: an
// existing primary artifact short-circuits the stage unless forced.
//
// Exit-code conventions live in the CLI; stages signal failure classes by
// exception type (ConfigError -> 2, data errors -> 3, degenerate analysis
// -> 4).

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/csv.hpp"
#include "afrkit/features.hpp"
#include "afrkit/nested_cv.hpp"
#include "afrkit/quality.hpp"
#include "afrkit/recordio.hpp"
#include "afrkit/stats.hpp"
#include "afrkit/synth.hpp"
#include "afrkit/toml.hpp"

namespace afrkit {

namespace fs = std::filesystem;

struct PipelineConfig {
  // segment extraction
  double region_s = 300.0;       // first/last window analyzed per phase
  double stat_window_s = 10.0;   // statistical task segments
  double ml_window_s = 60.0;     // classification task segments
  double overlap_s = 5.0;        // stride = window - overlap
  double stride_s = 0.0;         // explicit stride override (0 = overlap rule)
  double bsqi_threshold = 0.8;
  std::size_t top_k_stat = 1;
  std::size_t top_k_ml = 5;
  double match_tol_ms = 150.0;
  // features
  FeatureConfig features;
  // stats
  VolcanoConfig volcano;
  // learn
  NestedCvConfig cv;
  // general
  std::uint64_t seed = 0;

  ScanConfig scan_config() const {
    ScanConfig sc;
    sc.overlap_s = overlap_s;
    sc.stride_s = stride_s;
    sc.match_tol_ms = match_tol_ms;
    return sc;
  }

  static PipelineConfig from_toml(const std::string& path) {
    const TomlFile toml = TomlFile::parse_file(path);
    PipelineConfig c;
    c.region_s = toml.number("segments.region_s", c.region_s);
    c.stat_window_s = toml.number("segments.stat_window_s", c.stat_window_s);
    c.ml_window_s = toml.number("segments.ml_window_s", c.ml_window_s);
    c.overlap_s = toml.number("segments.overlap_s", c.overlap_s);
    c.stride_s = toml.number("segments.stride_s", c.stride_s);
    c.bsqi_threshold = toml.number("segments.bsqi_threshold", c.bsqi_threshold);
    c.top_k_stat = static_cast<std::size_t>(toml.number("segments.top_k_stat", 1));
    c.top_k_ml = static_cast<std::size_t>(toml.number("segments.top_k_ml", 5));
    c.match_tol_ms = toml.number("segments.match_tol_ms", c.match_tol_ms);
    c.features.hrv_min_intervals = static_cast<std::size_t>(
        toml.number("features.hrv_min_intervals", 10));
    c.features.rr_min_ms = toml.number("features.rr_min_ms", 300);
    c.features.rr_max_ms = toml.number("features.rr_max_ms", 2000);
    c.features.mor_min_beats =
        static_cast<std::size_t>(toml.number("features.mor_min_beats", 3));
    c.volcano.alpha = toml.number("stats.alpha", 0.05);
    c.volcano.log2_fc_threshold = toml.number("stats.log2_fc_threshold", 1.0);
    const std::string mode = toml.string("stats.fc_mode", "log2");
    if (mode == "raw") c.volcano.fc_mode = FcMode::Raw;
    else if (mode == "log2") c.volcano.fc_mode = FcMode::Log2;
    else throw ConfigError("stats.fc_mode must be 'log2' or 'raw'");
    c.cv.outer_k = static_cast<int>(toml.number("learn.outer_k", 8));
    c.cv.inner_k = static_cast<int>(toml.number("learn.inner_k", 8));
    c.cv.budget = static_cast<std::size_t>(toml.number("learn.budget", 50));
    const auto grid = toml.number_array("learn.k_grid", {3, 5, 8, 13, 21});
    c.cv.k_grid.clear();
    for (double g : grid) c.cv.k_grid.push_back(static_cast<std::size_t>(g));
    c.cv.vote_mean = toml.string("learn.vote", "share") == "mean";
    c.cv.pooled_score = toml.string("learn.score", "mean") == "pooled";
    c.seed = static_cast<std::uint64_t>(toml.number("pipeline.seed", 0));
    c.cv.seed = c.seed;
    validate(c);
    return c;
  }

  static void validate(const PipelineConfig& c) {
    if (c.region_s <= 0 || c.stat_window_s <= 0 || c.ml_window_s <= 0)
      throw ConfigError("window lengths must be positive");
    if (c.bsqi_threshold < 0 || c.bsqi_threshold > 1)
      throw ConfigError("bsqi_threshold must lie in [0, 1]");
    if (c.top_k_stat < 1 || c.top_k_ml < 1) throw ConfigError("top-k must be >= 1");
    if (c.match_tol_ms <= 0) throw ConfigError("match_tol_ms must be positive");
    if (c.volcano.alpha <= 0 || c.volcano.alpha >= 1)
      throw ConfigError("alpha must lie in (0, 1)");
    if (c.cv.outer_k < 2 || c.cv.inner_k < 2) throw ConfigError("fold counts must be >= 2");
  }
};

// --- synthetic cohort generation ----------------------------------------------

struct CohortSpec {
  std::size_t n_patients = 20;
  double duration_s = 630.0;  // per recording; two halves carry pre/post
  double fs = 500.0;
  double noise_uv = 5.0;
  double wander_uv = 30.0;
  double post_hr_shift_bpm = 0.0;  // planted pre-vs-post heart-rate change
  double hr_lo = 55.0, hr_hi = 90.0;
  double hrv_lo = 15.0, hrv_hi = 40.0;
  double label_fraction = 0.0;    // > 0 assigns labels; positives get the effect
  double label_hrv_factor = 2.5;  // positives' RR jitter multiplier
  std::uint64_t seed = 1;
  RecordingFormat format = RecordingFormat::FlatBinary;
};

// Generates flat-binary recordings, a manifest and a per-beat ground-truth
// CSV. Each recording is two independently generated halves so a planted
// post-phase change lands only in the second half.
inline CohortManifest make_synth_cohort(const CohortSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  Rng master(spec.seed);
  CohortManifest manifest;
  CsvWriter truth_csv(out_dir + "/ground_truth.csv");
  truth_csv.row({"patient_id", "phase", "beat", "r_time_s", "rr_ms", "qt_ms", "qrs_ms",
                 "pr_ms"});

  for (std::size_t i = 0; i < spec.n_patients; ++i) {
    Rng prng = master.spawn(10 + i);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "P%03zu", i + 1);
    const std::string pid = buf;

    SynthSpec half;
    half.patient_id = pid;
    half.fs = spec.fs;
    half.duration_s = spec.duration_s / 2.0;
    half.noise_uv = spec.noise_uv;
    half.wander_uv = spec.wander_uv;
    half.hr_bpm = prng.uniform(spec.hr_lo, spec.hr_hi);
    half.hrv_std_ms = prng.uniform(spec.hrv_lo, spec.hrv_hi);

    std::optional<int> label;
    if (spec.label_fraction > 0) {
      label = (prng.uniform() < spec.label_fraction) ? 1 : 0;
      if (*label == 1) half.hrv_std_ms *= spec.label_hrv_factor;
    }

    SynthSpec pre = half, post = half;
    pre.seed = master.spawn(1000 + i).next_u64();
    post.seed = master.spawn(2000 + i).next_u64();
    post.hr_bpm = std::min(220.0, half.hr_bpm + spec.post_hr_shift_bpm);

    auto [rec_pre, truth_pre] = generate(pre);
    auto [rec_post, truth_post] = generate(post);

    Recording rec = rec_pre;
    for (std::size_t l = 0; l < kNumLeads; ++l)
      rec.samples[l].insert(rec.samples[l].end(), rec_post.samples[l].begin(),
                            rec_post.samples[l].end());
    const std::string rel = pid + (spec.format == RecordingFormat::Csv ? ".csv" : ".bin");
    save_recording(rec, out_dir + "/" + rel, spec.format);

    for (std::size_t b = 0; b < truth_pre.beats.size(); ++b) {
      const auto& bt = truth_pre.beats[b];
      truth_csv.row({pid, "pre", std::to_string(b), format_double_short(bt.r_time_s),
                     format_double_short(bt.rr_ms), format_double_short(bt.qt_ms),
                     format_double_short(bt.qrs_ms), format_double_short(bt.pr_ms)});
    }
    for (std::size_t b = 0; b < truth_post.beats.size(); ++b) {
      const auto& bt = truth_post.beats[b];
      truth_csv.row({pid, "post", std::to_string(b),
                     format_double_short(bt.r_time_s + pre.duration_s),
                     format_double_short(bt.rr_ms), format_double_short(bt.qt_ms),
                     format_double_short(bt.qrs_ms), format_double_short(bt.pr_ms)});
    }

    ManifestEntry entry;
    entry.patient_id = pid;
    entry.recording_path = rel;
    entry.afr_label = label;
    entry.age = std::floor(prng.uniform(45.0, 85.0));
    entry.sex = (i % 2 == 0) ? 'M' : 'F';
    manifest.entries.push_back(std::move(entry));
  }
  save_manifest(manifest, out_dir + "/manifest.csv");
  return manifest;
}

// --- stage plumbing ------------------------------------------------------------

struct StageContext {
  std::string manifest_path;
  std::string out_dir;
  PipelineConfig config;
  bool force = false;
  std::ostream* log = nullptr;
  // explicit input overrides (default: artifacts in out_dir)
  std::string stats_pre_csv;
  std::string stats_post_csv;
  std::string train_csv;

  void say(const std::string& msg) const {
    if (log) (*log) << msg << "\n";
  }
  std::string path(const std::string& name) const { return out_dir + "/" + name; }
  bool fresh(const std::string& name) const { return force || !fs::exists(path(name)); }
};

inline std::string resolve_recording_path(const std::string& manifest_path,
                                          const std::string& rel) {
  const fs::path p(rel);
  if (p.is_absolute()) return rel;
  return (fs::path(manifest_path).parent_path() / p).string();
}

// ingest: validate every recording, log parse failures as exclusions.
inline void run_ingest(const StageContext& ctx) {
  if (!ctx.fresh("ingest_report.csv")) {
    ctx.say("ingest: report exists, skipping (use --force to redo)");
    return;
  }
  fs::create_directories(ctx.out_dir);
  const CohortManifest manifest = load_manifest(ctx.manifest_path);
  CsvWriter report(ctx.path("ingest_report.csv"));
  report.row({"patient_id", "status", "detail", "fs", "duration_s"});
  std::size_t ok = 0, corrupted = 0;
  for (const auto& e : manifest.entries) {
    const std::string rec_path = resolve_recording_path(ctx.manifest_path, e.recording_path);
    try {
      const Recording rec = load_recording(rec_path);
      if (rec.duration_s() < 2.0 * ctx.config.region_s)
        throw TruncatedData("recording shorter than the disjoint pre/post regions");
      report.row({e.patient_id, "ok", "", format_double_short(rec.fs),
                  format_double_short(rec.duration_s())});
      ++ok;
    } catch (const Error& err) {
      report.row({e.patient_id, "corrupted", err.what(), "", ""});
      ++corrupted;
    }
  }
  ctx.say("ingest: " + std::to_string(ok) + " ok, " + std::to_string(corrupted) +
          " corrupted/excluded");
}

namespace detail {

inline std::map<std::string, std::string> ingest_status(const StageContext& ctx) {
  const CsvTable t = read_csv(ctx.path("ingest_report.csv"));
  std::map<std::string, std::string> status;
  const int c_id = t.column("patient_id"), c_st = t.column("status");
  for (const auto& row : t.rows)
    status[row[static_cast<std::size_t>(c_id)]] = row[static_cast<std::size_t>(c_st)];
  return status;
}

}  // namespace detail

// segments: score both phases with both window sizes, select the best
// segments, exclude recordings whose best window fails the quality gate in
// any phase/task.
inline void run_segments(const StageContext& ctx) {
  run_ingest(ctx);
  if (!ctx.fresh("segments.csv")) {
    ctx.say("segments: artifact exists, skipping");
    return;
  }
  const CohortManifest manifest = load_manifest(ctx.manifest_path);
  const auto status = detail::ingest_status(ctx);

  CsvWriter seg_csv(ctx.path("segments.csv"));
  {
    std::vector<std::string> header = {"patient_id", "phase", "start_s", "dur_s",
                                       "bsqi_mean"};
    for (const auto& lead : standard_leads()) header.push_back("bsqi_" + lead);
    seg_csv.row(header);
  }
  CsvWriter excl_csv(ctx.path("exclusions.csv"));
  excl_csv.row({"patient_id", "stage", "reason"});

  std::size_t kept = 0, low_quality = 0;
  for (const auto& e : manifest.entries) {
    auto st = status.find(e.patient_id);
    if (st == status.end() || st->second != "ok") {
      excl_csv.row({e.patient_id, "ingest", "corrupted"});
      continue;
    }
    const Recording rec =
        load_recording(resolve_recording_path(ctx.manifest_path, e.recording_path));
    const double region = ctx.config.region_s;
    const Recording pre = window(rec, 0.0, region);
    const Recording post = window(rec, rec.duration_s() - region, region);

    bool excluded = false;
    std::vector<ScoredSegment> selected;
    for (const auto& [phase, reg, offset] :
         {std::tuple<std::string, const Recording*, double>{"pre", &pre, 0.0},
          std::tuple<std::string, const Recording*, double>{
              "post", &post, rec.duration_s() - region}}) {
      for (const auto& [win, k] :
           {std::pair<double, std::size_t>{ctx.config.stat_window_s, ctx.config.top_k_stat},
            std::pair<double, std::size_t>{ctx.config.ml_window_s, ctx.config.top_k_ml}}) {
        const auto scored = scan(*reg, win, ctx.config.scan_config(), phase, offset);
        const auto best = select(scored, k, ctx.config.bsqi_threshold);
        if (best.empty()) {
          excluded = true;
          excl_csv.row({e.patient_id, "segments",
                        "bSQI<" + format_double_short(ctx.config.bsqi_threshold) + " (" +
                            phase + ", " + format_double_short(win) + "s)"});
          break;
        }
        selected.insert(selected.end(), best.begin(), best.end());
      }
      if (excluded) break;
    }
    if (excluded) {
      ++low_quality;
      continue;
    }
    ++kept;
    for (const auto& seg : selected) {
      std::vector<std::string> row = {seg.patient_id, seg.phase, format_double(seg.start_s),
                                      format_double(seg.dur_s), format_double(seg.bsqi_mean)};
      for (double v : seg.per_lead_bsqi) row.push_back(format_double(v));
      seg_csv.row(row);
    }
  }
  ctx.say("segments: " + std::to_string(kept) + " recordings kept, " +
          std::to_string(low_quality) + " excluded for low quality");
}

// features: compute the 804-column vector for every selected segment.
inline void run_features(const StageContext& ctx) {
  run_segments(ctx);
  const std::vector<std::string> outputs = {"features_stat_pre.csv", "features_stat_post.csv",
                                            "features_ml_pre.csv", "features_ml_post.csv"};
  bool all_exist = true;
  for (const auto& o : outputs) all_exist = all_exist && !ctx.fresh(o);
  if (all_exist) {
    ctx.say("features: artifacts exist, skipping");
    return;
  }

  const CohortManifest manifest = load_manifest(ctx.manifest_path);
  std::map<std::string, const ManifestEntry*> meta;
  for (const auto& e : manifest.entries) meta[e.patient_id] = &e;

  const CsvTable segs = read_csv(ctx.path("segments.csv"));
  const int c_id = segs.column("patient_id"), c_phase = segs.column("phase"),
            c_start = segs.column("start_s"), c_dur = segs.column("dur_s");

  std::vector<std::string> header = {"patient_id", "phase", "segment_index",
                                     "start_s", "dur_s"};
  for (const auto& name : ecg_feature_names()) header.push_back(name);
  header.push_back("age");
  header.push_back("sex");

  std::map<std::string, CsvWriter> writers;
  for (const auto& o : outputs) {
    writers.emplace(o, ctx.path(o));
    writers.at(o).row(header);
  }

  std::map<std::string, std::size_t> seg_counter;  // per (patient, phase, task)
  std::string current_patient;
  Recording rec;
  for (const auto& row : segs.rows) {
    const std::string pid = row[static_cast<std::size_t>(c_id)];
    const std::string phase = row[static_cast<std::size_t>(c_phase)];
    const double start_s = parse_double_or_missing(row[static_cast<std::size_t>(c_start)]);
    const double dur_s = parse_double_or_missing(row[static_cast<std::size_t>(c_dur)]);
    const bool is_stat = std::fabs(dur_s - ctx.config.stat_window_s) <
                         std::fabs(dur_s - ctx.config.ml_window_s);
    const std::string out_name =
        std::string("features_") + (is_stat ? "stat" : "ml") + "_" + phase + ".csv";

    if (pid != current_patient) {
      rec = load_recording(
          resolve_recording_path(ctx.manifest_path, meta.at(pid)->recording_path));
      current_patient = pid;
    }
    const Recording seg = window(rec, start_s, dur_s);
    const std::vector<double> values = segment_features(seg, ctx.config.features);

    const std::string counter_key = pid + "|" + phase + "|" + (is_stat ? "stat" : "ml");
    const std::size_t seg_idx = seg_counter[counter_key]++;

    std::vector<std::string> out_row = {pid, phase, std::to_string(seg_idx),
                                        format_double(start_s), format_double(dur_s)};
    for (double v : values) out_row.push_back(format_double(v));
    const ManifestEntry* entry = meta.at(pid);
    out_row.push_back(entry->age ? format_double(*entry->age) : "");
    out_row.push_back(entry->sex ? (*entry->sex == 'M' ? "1" : "0") : "");
    writers.at(out_name).row(out_row);
  }
  ctx.say("features: wrote " + std::to_string(outputs.size()) + " tables");
}

// --- stats stage ---------------------------------------------------------------

inline PairedFeatureTable paired_table_from_csvs(const std::string& pre_path,
                                                 const std::string& post_path) {
  const CsvTable pre = read_csv(pre_path);
  const CsvTable post = read_csv(post_path);

  // ECG feature columns only, in the pre-file order.
  std::vector<std::string> features;
  std::vector<int> pre_cols, post_cols;
  const std::set<std::string> known(ecg_feature_names().begin(), ecg_feature_names().end());
  for (std::size_t i = 0; i < pre.header.size(); ++i) {
    if (!known.count(pre.header[i])) continue;
    const CsvTable& po = post;
    int pc = -1;
    for (std::size_t j = 0; j < po.header.size(); ++j)
      if (po.header[j] == pre.header[i]) pc = static_cast<int>(j);
    if (pc < 0) continue;
    features.push_back(pre.header[i]);
    pre_cols.push_back(static_cast<int>(i));
    post_cols.push_back(pc);
  }

  auto first_rows = [](const CsvTable& t) {
    std::map<std::string, const std::vector<std::string>*> by_patient;
    const int c_id = t.column("patient_id");
    for (const auto& row : t.rows)
      by_patient.emplace(row[static_cast<std::size_t>(c_id)], &row);
    return by_patient;
  };
  const auto pre_rows = first_rows(pre);
  const auto post_rows = first_rows(post);

  PairedFeatureTable table;
  table.features = features;
  for (const auto& [pid, pre_row] : pre_rows) {
    auto it = post_rows.find(pid);
    if (it == post_rows.end()) continue;
    table.patients.push_back(pid);
    std::vector<double> pre_vals(features.size()), post_vals(features.size());
    for (std::size_t f = 0; f < features.size(); ++f) {
      pre_vals[f] =
          parse_double_or_missing((*pre_row)[static_cast<std::size_t>(pre_cols[f])]);
      post_vals[f] =
          parse_double_or_missing((*it->second)[static_cast<std::size_t>(post_cols[f])]);
    }
    table.pre.push_back(std::move(pre_vals));
    table.post.push_back(std::move(post_vals));
  }
  return table;
}

inline void write_volcano_csv(const std::vector<VolcanoRow>& rows,
                              const std::string& path, const std::string& supp_path) {
  CsvWriter w(path);
  w.row({"feature", "p_value", "mean_fc", "log2_fc", "significant"});
  for (const auto& r : rows)
    w.row({r.feature, format_double(r.p_value), format_double(r.mean_fc),
           format_double(r.log2_fc), r.significant ? "1" : "0"});
  CsvWriter s(supp_path);
  s.row({"feature", "p_bh", "n_pairs", "dropped_zero_pre", "degenerate", "sign_varies"});
  for (const auto& r : rows)
    s.row({r.feature, format_double(r.p_bh), std::to_string(r.n_pairs),
           std::to_string(r.dropped_zero_pre), r.degenerate ? "1" : "0",
           r.sign_varies ? "1" : "0"});
}

inline void run_stats(const StageContext& ctx) {
  const bool external_inputs = !ctx.stats_pre_csv.empty() && !ctx.stats_post_csv.empty();
  if (!external_inputs) run_features(ctx);
  else fs::create_directories(ctx.out_dir);
  if (!ctx.fresh("volcano.csv")) {
    ctx.say("stats: volcano.csv exists, skipping");
    return;
  }
  const PairedFeatureTable table = paired_table_from_csvs(
      external_inputs ? ctx.stats_pre_csv : ctx.path("features_stat_pre.csv"),
      external_inputs ? ctx.stats_post_csv : ctx.path("features_stat_post.csv"));
  const auto rows = volcano(table, ctx.config.volcano);
  write_volcano_csv(rows, ctx.path("volcano.csv"), ctx.path("volcano_supplementary.csv"));
  std::size_t n_sig = 0;
  for (const auto& r : rows) n_sig += r.significant ? 1 : 0;
  ctx.say("stats: " + std::to_string(rows.size()) + " features, " + std::to_string(n_sig) +
          " significant");
}

// --- train stage ---------------------------------------------------------------

enum class FeatureSet { Meta, Ecg, MetaEcg };

inline std::string feature_set_name(FeatureSet s) {
  switch (s) {
    case FeatureSet::Meta: return "meta";
    case FeatureSet::Ecg: return "ecg";
    default: return "meta+ecg";
  }
}

inline CohortTable cohort_from_features_csv(const std::string& features_path,
                                            const CohortManifest& manifest,
                                            FeatureSet set,
                                            std::size_t max_segments_per_patient = 5) {
  const CsvTable t = read_csv(features_path);
  std::vector<std::string> names;
  if (set != FeatureSet::Meta)
    names.insert(names.end(), ecg_feature_names().begin(), ecg_feature_names().end());
  if (set != FeatureSet::Ecg) {
    names.push_back("age");
    names.push_back("sex");
  }
  std::vector<int> cols;
  for (const auto& n : names) {
    const int c = t.column(n);
    if (c < 0) throw MalformedHeader(features_path + ": missing column " + n);
    cols.push_back(c);
  }

  std::map<std::string, int> label_of;
  for (const auto& e : manifest.entries)
    if (e.afr_label) label_of[e.patient_id] = *e.afr_label;

  CohortTable cohort;
  cohort.feature_names = names;
  std::map<std::string, std::size_t> patient_index;
  std::map<std::string, std::size_t> seg_count;
  const int c_id = t.column("patient_id");
  for (const auto& row : t.rows) {
    const std::string pid = row[static_cast<std::size_t>(c_id)];
    auto lbl = label_of.find(pid);
    if (lbl == label_of.end()) continue;  // unlabeled patients are not trainable
    if (seg_count[pid] >= max_segments_per_patient) continue;
    ++seg_count[pid];
    auto [it, inserted] = patient_index.emplace(pid, cohort.patient_ids.size());
    if (inserted) {
      cohort.patient_ids.push_back(pid);
      cohort.patient_labels.push_back(lbl->second);
    }
    cohort.row_patient.push_back(it->second);
    std::vector<double> vals(cols.size());
    for (std::size_t f = 0; f < cols.size(); ++f)
      vals[f] = parse_double_or_missing(row[static_cast<std::size_t>(cols[f])]);
    cohort.rows.push_back(std::move(vals));
  }
  return cohort;
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') { out.push_back('\\'); out.push_back(c); }
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

inline std::string json_number(double v) {
  if (is_missing(v)) return "null";
  return format_double(v);
}

// Hand-rolled, field-ordered JSON so artifacts are byte-stable.
inline std::string cv_report_json(const CvReport& r, const std::string& phase,
                                  const std::string& feature_set) {
  std::ostringstream o;
  o << "{\n";
  o << "  \"phase\": \"" << json_escape(phase) << "\",\n";
  o << "  \"feature_set\": \"" << json_escape(feature_set) << "\",\n";
  o << "  \"config\": {\"outer_k\": " << r.config.outer_k
    << ", \"inner_k\": " << r.config.inner_k << ", \"budget\": " << r.config.budget
    << ", \"seed\": " << r.config.seed << ", \"vote\": \""
    << (r.config.vote_mean ? "mean" : "share") << "\", \"score\": \""
    << (r.config.pooled_score ? "pooled" : "mean") << "\", \"k_grid\": [";
  for (std::size_t i = 0; i < r.config.k_grid.size(); ++i)
    o << (i ? ", " : "") << r.config.k_grid[i];
  o << "]},\n";
  o << "  \"mean_auroc\": " << json_number(r.mean_auroc) << ",\n";
  o << "  \"pooled_auroc\": " << json_number(r.pooled_auroc) << ",\n";
  o << "  \"n_scored_folds\": " << r.n_scored_folds << ",\n";
  o << "  \"folds\": [\n";
  for (std::size_t i = 0; i < r.folds.size(); ++i) {
    const auto& f = r.folds[i];
    o << "    {\"fold\": " << f.fold << ", \"skipped\": " << (f.skipped ? "true" : "false");
    if (f.skipped) {
      o << ", \"reason\": \"" << json_escape(f.skip_reason) << "\"}";
    } else {
      o << ", \"auroc\": " << json_number(f.auroc) << ", \"k_features\": " << f.k_features
        << ", \"hyperparams\": {\"n_trees\": " << f.hp.n_trees
        << ", \"max_depth\": " << f.hp.max_depth << ", \"min_leaf\": " << f.hp.min_leaf
        << ", \"features_per_split\": \"" << f.hp.split_mode_name() << "\""
        << ", \"split_fraction\": " << json_number(f.hp.split_fraction)
        << ", \"class_weight\": \"" << (f.hp.balanced ? "balanced" : "none") << "\"}"
        << ", \"selected_features\": [";
      for (std::size_t s = 0; s < f.selected_features.size(); ++s)
        o << (s ? ", " : "") << "\"" << json_escape(f.selected_features[s]) << "\"";
      o << "], \"test_patients\": [";
      for (std::size_t s = 0; s < f.test_patients.size(); ++s)
        o << (s ? ", " : "") << "\"" << json_escape(f.test_patients[s]) << "\"";
      o << "], \"patient_scores\": {";
      for (std::size_t s = 0; s < f.patient_scores.size(); ++s)
        o << (s ? ", " : "") << "\"" << json_escape(f.patient_scores[s].first)
          << "\": " << json_number(f.patient_scores[s].second);
      o << "}}";
    }
    o << (i + 1 < r.folds.size() ? ",\n" : "\n");
  }
  o << "  ]\n}\n";
  return o.str();
}

inline CvReport run_train(const StageContext& ctx, const std::string& phase,
                          FeatureSet set) {
  if (ctx.train_csv.empty()) run_features(ctx);
  const std::string tag = phase + "_" + (set == FeatureSet::MetaEcg
                                             ? "meta_ecg"
                                             : feature_set_name(set));
  const std::string json_name = "cv_report_" + tag + ".json";

  const CohortManifest manifest = load_manifest(ctx.manifest_path);
  const std::string features_csv =
      ctx.train_csv.empty() ? ctx.path("features_ml_" + phase + ".csv") : ctx.train_csv;
  CohortTable cohort =
      cohort_from_features_csv(features_csv, manifest, set, ctx.config.top_k_ml);
  NestedCvConfig cv_cfg = ctx.config.cv;
  cv_cfg.seed = ctx.config.seed;
  if (set == FeatureSet::Meta) cv_cfg.use_mrmr = false;  // k capped at feature count
  const CvReport report = nested_cv(cohort, cv_cfg);

  fs::create_directories(ctx.out_dir);
  {
    std::ofstream out(ctx.path(json_name), std::ios::binary);
    out << cv_report_json(report, phase, feature_set_name(set));
  }
  CsvWriter roc_csv(ctx.path("roc_" + tag + ".csv"));
  roc_csv.row({"fold", "fpr", "tpr"});
  for (const auto& f : report.folds) {
    if (f.skipped) continue;
    for (const auto& [fpr, tpr] : f.roc)
      roc_csv.row({std::to_string(f.fold), format_double(fpr), format_double(tpr)});
  }
  ctx.say("train[" + tag + "]: mean AUROC = " + format_double_short(report.mean_auroc) +
          " over " + std::to_string(report.n_scored_folds) + " folds");
  return report;
}

// report: exclusion accounting across stages.
struct ExclusionReport {
  std::size_t total = 0;
  std::size_t processed = 0;
  std::size_t corrupted = 0;
  std::size_t low_quality = 0;
};

inline ExclusionReport run_report(const StageContext& ctx) {
  run_segments(ctx);
  const CohortManifest manifest = load_manifest(ctx.manifest_path);
  ExclusionReport rep;
  rep.total = manifest.entries.size();

  const auto status = detail::ingest_status(ctx);
  std::set<std::string> excluded_low;
  const CsvTable excl = read_csv(ctx.path("exclusions.csv"));
  const int c_id = excl.column("patient_id"), c_stage = excl.column("stage");
  for (const auto& row : excl.rows)
    if (row[static_cast<std::size_t>(c_stage)] == "segments")
      excluded_low.insert(row[static_cast<std::size_t>(c_id)]);

  for (const auto& e : manifest.entries) {
    auto st = status.find(e.patient_id);
    if (st == status.end() || st->second != "ok") ++rep.corrupted;
    else if (excluded_low.count(e.patient_id)) ++rep.low_quality;
    else ++rep.processed;
  }

  CsvWriter w(ctx.path("exclusion_report.csv"));
  w.row({"category", "count"});
  w.row({"total", std::to_string(rep.total)});
  w.row({"processed", std::to_string(rep.processed)});
  w.row({"corrupted", std::to_string(rep.corrupted)});
  w.row({"low_quality", std::to_string(rep.low_quality)});
  ctx.say("report: " + std::to_string(rep.total) + " = " + std::to_string(rep.processed) +
          " processed + " + std::to_string(rep.corrupted) + " corrupted + " +
          std::to_string(rep.low_quality) + " low-quality");
  return rep;
}

}  // namespace afrkit
