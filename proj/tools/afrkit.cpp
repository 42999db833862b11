// Command-line front end for the toolkit.
//
//   afrkit synth     generate a synthetic cohort (recordings + manifest + truth)
//   afrkit ingest    validate recordings, log corrupted ones
//   afrkit segments  quality-scan the pre/post regions, select best segments
//   afrkit features  compute the 804-column feature tables
//   afrkit stats     paired pre-vs-post volcano table
//   afrkit train     nested-CV random-forest risk prediction
//   afrkit report    exclusion accounting
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 degenerate analysis.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "afrkit/pipeline.hpp"

namespace {

int classify_error(const afrkit::Error& e) {
  using afrkit::ErrorCode;
  switch (e.code()) {
    case ErrorCode::ConfigError:
      return 2;
    case ErrorCode::TooFewPatients:
    case ErrorCode::TooFewPairs:
    case ErrorCode::AllPairsDegenerate:
    case ErrorCode::SingleClassTraining:
    case ErrorCode::OneClassOnly:
    case ErrorCode::InsufficientBeats:
      return 4;
    default:
      return 3;
  }
}

struct CommonOpts {
  std::string manifest;
  std::string out_dir = "out";
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_manifest = true) {
  if (needs_manifest)
    cmd->add_option("--manifest", opts.manifest, "cohort manifest CSV")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--config", opts.config_path, "pipeline config TOML");
  cmd->add_option("--seed", opts.seed, "override the config seed")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_flag("--force", opts.force, "recompute artifacts even if present");
}

afrkit::StageContext make_context(const CommonOpts& opts) {
  afrkit::StageContext ctx;
  ctx.manifest_path = opts.manifest;
  ctx.out_dir = opts.out_dir;
  ctx.config = opts.config_path.empty()
                   ? afrkit::PipelineConfig{}
                   : afrkit::PipelineConfig::from_toml(opts.config_path);
  if (opts.seed_set) {
    ctx.config.seed = opts.seed;
    ctx.config.cv.seed = opts.seed;
  }
  ctx.force = opts.force;
  ctx.log = &std::cout;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ECG pre/post feature engineering and AF-recurrence risk prediction"};
  app.require_subcommand(1);

  // --- synth ---
  afrkit::CohortSpec cohort;
  std::string synth_out = "cohort";
  std::string synth_format = "bin";
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--out", synth_out, "cohort output directory");
  synth->add_option("--patients", cohort.n_patients, "number of patients");
  synth->add_option("--duration", cohort.duration_s, "recording duration in seconds");
  synth->add_option("--fs", cohort.fs, "sampling frequency in Hz");
  synth->add_option("--noise-uv", cohort.noise_uv, "white noise RMS in microvolts");
  synth->add_option("--wander-uv", cohort.wander_uv, "baseline wander amplitude");
  synth->add_option("--post-hr-shift", cohort.post_hr_shift_bpm,
                    "heart-rate shift planted in the post phase (bpm)");
  synth->add_option("--label-frac", cohort.label_fraction,
                    "fraction of patients given an AFR label of 1");
  synth->add_option("--label-hrv-factor", cohort.label_hrv_factor,
                    "RR-jitter multiplier for positive patients");
  synth->add_option("--seed", cohort.seed, "generator seed");
  synth->add_option("--format", synth_format, "recording format: bin or csv")
      ->check(CLI::IsMember({"bin", "csv"}));

  CommonOpts ingest_opts, segments_opts, features_opts, stats_opts, report_opts;
  add_common(app.add_subcommand("ingest", "validate recordings"), ingest_opts);
  double stride_s = 0.0;
  auto* segments = app.add_subcommand("segments", "score and select quality segments");
  add_common(segments, segments_opts);
  segments->add_option("--stride", stride_s,
                       "explicit scan stride in seconds (default: window - overlap)");
  add_common(app.add_subcommand("features", "compute feature tables"), features_opts);
  std::string stats_pre, stats_post;
  auto* stats = app.add_subcommand("stats", "paired pre-vs-post volcano analysis");
  add_common(stats, stats_opts);
  stats->add_option("--pre", stats_pre, "pre-phase feature CSV (default: from --out)");
  stats->add_option("--post", stats_post, "post-phase feature CSV (default: from --out)");
  add_common(app.add_subcommand("report", "exclusion accounting"), report_opts);

  CommonOpts train_opts;
  std::string train_phase = "post";
  std::string train_features = "meta+ecg";
  std::string train_csv;
  int outer_k = 0, inner_k = 0;
  std::size_t budget = 0;
  auto* train = app.add_subcommand("train", "nested-CV risk prediction");
  add_common(train, train_opts);
  train->add_option("--features-csv", train_csv,
                    "feature table to train on (default: from --out)");
  train->add_option("--phase", train_phase, "pre or post")
      ->check(CLI::IsMember({"pre", "post"}));
  train->add_option("--features", train_features, "meta, ecg, or meta+ecg")
      ->check(CLI::IsMember({"meta", "ecg", "meta+ecg"}));
  train->add_option("--outer-k", outer_k, "outer folds (default 8)");
  train->add_option("--inner-k", inner_k, "inner folds (default 8)");
  train->add_option("--budget", budget, "hyperparameter search budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      cohort.format = synth_format == "csv" ? afrkit::RecordingFormat::Csv
                                            : afrkit::RecordingFormat::FlatBinary;
      const auto manifest = afrkit::make_synth_cohort(cohort, synth_out);
      std::cout << "synth: wrote " << manifest.entries.size() << " recordings to "
                << synth_out << "\n";
      return 0;
    }
    if (app.get_subcommand("ingest")->parsed()) {
      afrkit::run_ingest(make_context(ingest_opts));
      return 0;
    }
    if (segments->parsed()) {
      auto ctx = make_context(segments_opts);
      if (stride_s > 0) ctx.config.stride_s = stride_s;
      afrkit::run_segments(ctx);
      return 0;
    }
    if (app.get_subcommand("features")->parsed()) {
      afrkit::run_features(make_context(features_opts));
      return 0;
    }
    if (stats->parsed()) {
      auto ctx = make_context(stats_opts);
      ctx.stats_pre_csv = stats_pre;
      ctx.stats_post_csv = stats_post;
      afrkit::run_stats(ctx);
      return 0;
    }
    if (app.get_subcommand("report")->parsed()) {
      afrkit::run_report(make_context(report_opts));
      return 0;
    }
    if (train->parsed()) {
      auto ctx = make_context(train_opts);
      ctx.train_csv = train_csv;
      if (outer_k > 0) ctx.config.cv.outer_k = outer_k;
      if (inner_k > 0) ctx.config.cv.inner_k = inner_k;
      if (budget > 0) ctx.config.cv.budget = budget;
      afrkit::FeatureSet set = afrkit::FeatureSet::MetaEcg;
      if (train_features == "meta") set = afrkit::FeatureSet::Meta;
      if (train_features == "ecg") set = afrkit::FeatureSet::Ecg;
      afrkit::run_train(ctx, train_phase, set);
      return 0;
    }
  } catch (const afrkit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
