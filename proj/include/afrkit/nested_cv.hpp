#pragma once

// Nested cross-validation: 8 patient-grouped outer folds estimate
// generalization; 8 inner folds tune the hyperparameters and the number of
// mRMR-selected features. Per outer fold: fit imputer and scaler on the
// outer-training rows, rank features with mRMR once (the same ranking serves
// every inner validation; the tuned k takes a prefix), search hyperparameters
// on inner AUROC, refit on the whole outer-training split, and score the
// held-out patients through the segment vote. The reported score is the
// arithmetic mean of the outer-fold AUROCs.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/learn.hpp"
#include "afrkit/search.hpp"

namespace afrkit {

struct SearchSpaceConfig {
  int n_trees_lo = 50, n_trees_hi = 500;
  int max_depth_lo = 2, max_depth_hi = 12;
  int min_leaf_lo = 1, min_leaf_hi = 8;
};

struct NestedCvConfig {
  int outer_k = 8;
  int inner_k = 8;
  std::size_t budget = 50;
  std::vector<std::size_t> k_grid = {3, 5, 8, 13, 21};
  std::uint64_t seed = 0;
  bool use_mrmr = true;       // META-only harness disables selection
  bool vote_mean = false;     // aggregate patient score by mean probability
  bool pooled_score = false;  // pool outer predictions instead of averaging
  SearchSpaceConfig space;
};

struct FoldReport {
  int fold = -1;
  bool skipped = false;
  std::string skip_reason;
  std::vector<std::string> train_patients;
  std::vector<std::string> test_patients;
  std::vector<std::string> fit_patients;  // what preprocessing/mRMR/search saw
  std::vector<std::string> selected_features;
  HyperParams hp;
  std::size_t k_features = 0;
  std::size_t n_inner_folds = 0;
  std::size_t n_evaluations = 0;
  std::vector<std::pair<std::string, double>> patient_scores;
  std::vector<std::pair<double, double>> roc;
  double auroc = kMissing;
};

struct CvReport {
  NestedCvConfig config;
  std::vector<FoldReport> folds;
  double mean_auroc = kMissing;    // arithmetic mean of outer-fold AUROCs
  double pooled_auroc = kMissing;  // comparison mode: all outer predictions pooled
  std::size_t n_scored_folds = 0;
};

namespace detail {

// Balanced fold sizes with classes dealt in blocks, so labels spread across
// folds as evenly as the counts allow.
inline std::vector<int> assign_folds(const std::vector<int>& labels, int k, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] ? pos : neg).push_back(i);
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<int> fold(labels.size(), 0);
  std::size_t counter = 0;
  for (std::size_t i : pos) fold[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
  for (std::size_t i : neg) fold[i] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
  return fold;
}

struct PatientScore {
  std::size_t patient = 0;
  double score = 0.0;
  int label = 0;
};

inline std::vector<PatientScore> score_patients(
    const Forest& forest, const Matrix& rows, const std::vector<std::size_t>& row_patient,
    const std::vector<std::size_t>& row_ids, const std::vector<int>& patient_labels,
    bool vote_mean) {
  std::map<std::size_t, std::vector<double>> probs;
  for (std::size_t rid : row_ids)
    probs[row_patient[rid]].push_back(forest.predict_proba(rows[rid]));
  std::vector<PatientScore> out;
  for (const auto& [patient, p] : probs) {
    PatientScore ps;
    ps.patient = patient;
    ps.label = patient_labels[patient];
    if (vote_mean) {
      double acc = 0.0;
      for (double v : p) acc += v;
      ps.score = acc / static_cast<double>(p.size());
    } else {
      ps.score = vote(p).score;
    }
    out.push_back(ps);
  }
  return out;
}

inline bool both_classes(const std::vector<PatientScore>& scores) {
  bool has0 = false, has1 = false;
  for (const auto& s : scores) (s.label ? has1 : has0) = true;
  return has0 && has1;
}

}  // namespace detail

inline CvReport nested_cv(const CohortTable& cohort, const NestedCvConfig& cfg) {
  if (cohort.n_patients() < 16)
    throw TooFewPatients("nested CV needs >= 16 labeled patients, have " +
                         std::to_string(cohort.n_patients()));
  {
    bool has0 = false, has1 = false;
    for (int l : cohort.patient_labels) (l ? has1 : has0) = true;
    if (!has0 || !has1) throw SingleClassTraining("cohort labels contain a single class");
  }

  CvReport report;
  report.config = cfg;
  Rng master(cfg.seed);
  Rng fold_rng = master.spawn(1);
  const std::vector<int> outer_fold =
      detail::assign_folds(cohort.patient_labels, cfg.outer_k, fold_rng);

  const std::size_t nf = cohort.n_features();
  std::vector<detail::PatientScore> pooled;

  for (int f = 0; f < cfg.outer_k; ++f) {
    FoldReport fr;
    fr.fold = f;

    std::vector<std::size_t> train_pat, test_pat;
    for (std::size_t p = 0; p < cohort.n_patients(); ++p)
      (outer_fold[p] == f ? test_pat : train_pat).push_back(p);
    for (std::size_t p : train_pat) fr.train_patients.push_back(cohort.patient_ids[p]);
    for (std::size_t p : test_pat) fr.test_patients.push_back(cohort.patient_ids[p]);

    bool test_has0 = false, test_has1 = false;
    for (std::size_t p : test_pat)
      (cohort.patient_labels[p] ? test_has1 : test_has0) = true;
    if (!test_has0 || !test_has1) {
      fr.skipped = true;
      fr.skip_reason = "FoldClassCollapse: outer-test fold holds a single class";
      report.folds.push_back(std::move(fr));
      continue;
    }

    std::vector<bool> in_test(cohort.n_patients(), false);
    for (std::size_t p : test_pat) in_test[p] = true;
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < cohort.rows.size(); ++r)
      (in_test[cohort.row_patient[r]] ? test_rows : train_rows).push_back(r);

    // Preprocessing is fitted on the outer-training rows only.
    Matrix train_X;
    std::vector<int> train_y;
    train_X.reserve(train_rows.size());
    for (std::size_t r : train_rows) {
      train_X.push_back(cohort.rows[r]);
      train_y.push_back(cohort.patient_labels[cohort.row_patient[r]]);
    }
    fr.fit_patients = fr.train_patients;
    const MedianImputer imputer = MedianImputer::fit(train_X);
    imputer.apply(train_X);
    const Standardizer scaler = Standardizer::fit(train_X);
    scaler.apply(train_X);
    const std::vector<bool> usable = imputer.usable(nf);

    // One mRMR ranking per outer fold; the tuned k takes a prefix of it.
    std::size_t k_cap = 0;
    for (bool u : usable) k_cap += u ? 1 : 0;
    std::vector<std::size_t> ranking;
    if (cfg.use_mrmr) {
      std::size_t k_max = 0;
      for (std::size_t k : cfg.k_grid) k_max = std::max(k_max, k);
      ranking = mrmr_select(train_X, train_y, std::min(k_max, k_cap), &usable);
    } else {
      for (std::size_t i = 0; i < nf; ++i)
        if (usable[i]) ranking.push_back(i);
    }
    std::vector<std::size_t> k_candidates;
    for (std::size_t k : cfg.k_grid) {
      const std::size_t kk = std::min(k, ranking.size());
      if (kk > 0 && std::find(k_candidates.begin(), k_candidates.end(), kk) ==
                        k_candidates.end())
        k_candidates.push_back(kk);
    }
    if (!cfg.use_mrmr || k_candidates.empty()) k_candidates = {ranking.size()};

    // Inner folds over the outer-training patients.
    Rng inner_rng = master.spawn(100 + static_cast<std::uint64_t>(f));
    std::vector<int> train_labels;
    for (std::size_t p : train_pat) train_labels.push_back(cohort.patient_labels[p]);
    const std::vector<int> inner_fold =
        detail::assign_folds(train_labels, cfg.inner_k, inner_rng);
    fr.n_inner_folds = static_cast<std::size_t>(cfg.inner_k);

    std::vector<std::size_t> row_local_patient(train_rows.size());
    {
      std::map<std::size_t, std::size_t> local_of;
      for (std::size_t i = 0; i < train_pat.size(); ++i) local_of[train_pat[i]] = i;
      for (std::size_t i = 0; i < train_rows.size(); ++i)
        row_local_patient[i] = local_of[cohort.row_patient[train_rows[i]]];
    }

    auto subset_columns = [&](const std::vector<double>& row,
                              const std::vector<std::size_t>& cols) {
      std::vector<double> out(cols.size());
      for (std::size_t i = 0; i < cols.size(); ++i) out[i] = row[cols[i]];
      return out;
    };

    // Search space: RF hyperparameters plus the mRMR prefix length.
    std::vector<ParamDomain> space = {
        ParamDomain::integer(cfg.space.n_trees_lo, cfg.space.n_trees_hi),
        ParamDomain::integer(cfg.space.max_depth_lo, cfg.space.max_depth_hi),
        ParamDomain::integer(cfg.space.min_leaf_lo, cfg.space.min_leaf_hi),
        ParamDomain::categorical(3),            // sqrt / log2 / fraction
        ParamDomain::real(0.05, 1.0),           // fraction value
        ParamDomain::categorical(2),            // class weight none / balanced
        ParamDomain::categorical(static_cast<int>(k_candidates.size())),
    };
    auto decode_hp = [&](const std::vector<double>& x) {
      HyperParams hp;
      hp.n_trees = static_cast<int>(x[0]);
      hp.max_depth = static_cast<int>(x[1]);
      hp.min_leaf = static_cast<int>(x[2]);
      hp.split_mode = x[3] == 0 ? SplitFeatures::Sqrt
                                : (x[3] == 1 ? SplitFeatures::Log2 : SplitFeatures::Fraction);
      hp.split_fraction = x[4];
      hp.balanced = x[5] != 0;
      return hp;
    };

    const std::uint64_t fold_seed_base =
        cfg.seed ^ (0x5851f42d4c957f2dULL * (static_cast<std::uint64_t>(f) + 1));

    auto objective = [&](const std::vector<double>& x, std::size_t eval_idx) -> double {
      const HyperParams hp = decode_hp(x);
      const auto& cols_k = k_candidates[static_cast<std::size_t>(x[6])];
      std::vector<std::size_t> cols(ranking.begin(),
                                    ranking.begin() + static_cast<long>(cols_k));
      double auc_sum = 0.0;
      std::size_t auc_n = 0;
      for (int inner = 0; inner < cfg.inner_k; ++inner) {
        Matrix fit_X;
        std::vector<int> fit_y;
        std::vector<std::size_t> val_rows;
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
          if (inner_fold[row_local_patient[i]] == inner) {
            val_rows.push_back(i);
          } else {
            fit_X.push_back(subset_columns(train_X[i], cols));
            fit_y.push_back(train_y[i]);
          }
        }
        bool has0 = false, has1 = false;
        for (int yv : fit_y) (yv ? has1 : has0) = true;
        if (!has0 || !has1 || val_rows.empty()) continue;

        Forest forest;
        try {
          forest = rf_train(fit_X, fit_y, hp,
                            fold_seed_base ^ (eval_idx * 131ULL + static_cast<std::uint64_t>(inner)));
        } catch (const Error&) {
          continue;
        }
        std::map<std::size_t, std::vector<double>> probs;
        for (std::size_t i : val_rows)
          probs[row_local_patient[i]].push_back(
              forest.predict_proba(subset_columns(train_X[i], cols)));
        std::vector<double> scores;
        std::vector<int> labels;
        for (const auto& [local_pat, p] : probs) {
          double sc;
          if (cfg.vote_mean) {
            sc = 0.0;
            for (double v : p) sc += v;
            sc /= static_cast<double>(p.size());
          } else {
            sc = vote(p).score;
          }
          scores.push_back(sc);
          labels.push_back(train_labels[local_pat]);
        }
        try {
          auc_sum += roc_auc(scores, labels).auroc;
          ++auc_n;
        } catch (const OneClassOnly&) {
        }
      }
      return auc_n ? auc_sum / static_cast<double>(auc_n) : 0.5;
    };

    const SearchResult search = hyper_search(objective, space, cfg.budget, fold_seed_base);
    fr.n_evaluations = search.history.size();
    fr.hp = decode_hp(search.best);
    fr.k_features = k_candidates[static_cast<std::size_t>(search.best[6])];

    std::vector<std::size_t> cols(ranking.begin(),
                                  ranking.begin() + static_cast<long>(fr.k_features));
    for (std::size_t c : cols) fr.selected_features.push_back(cohort.feature_names[c]);

    // Refit on the full outer-training split and score the held-out patients.
    Matrix refit_X;
    refit_X.reserve(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i)
      refit_X.push_back(subset_columns(train_X[i], cols));
    const Forest forest = rf_train(refit_X, train_y, fr.hp, fold_seed_base ^ 0xabcdefULL);

    Matrix test_X;
    test_X.reserve(test_rows.size());
    for (std::size_t r : test_rows) test_X.push_back(cohort.rows[r]);
    imputer.apply(test_X);
    scaler.apply(test_X);

    std::map<std::size_t, std::vector<double>> probs;
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      probs[cohort.row_patient[test_rows[i]]].push_back(
          forest.predict_proba(subset_columns(test_X[i], cols)));
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& [pat, p] : probs) {
      double sc;
      if (cfg.vote_mean) {
        sc = 0.0;
        for (double v : p) sc += v;
        sc /= static_cast<double>(p.size());
      } else {
        sc = vote(p).score;
      }
      fr.patient_scores.emplace_back(cohort.patient_ids[pat], sc);
      scores.push_back(sc);
      labels.push_back(cohort.patient_labels[pat]);
      pooled.push_back({pat, sc, cohort.patient_labels[pat]});
    }
    const RocResult roc = roc_auc(scores, labels);
    fr.auroc = roc.auroc;
    fr.roc = roc.curve;
    report.folds.push_back(std::move(fr));
  }

  double auc_sum = 0.0;
  for (const auto& fr : report.folds)
    if (!fr.skipped) {
      auc_sum += fr.auroc;
      ++report.n_scored_folds;
    }
  if (report.n_scored_folds)
    report.mean_auroc = auc_sum / static_cast<double>(report.n_scored_folds);
  if (!pooled.empty()) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& ps : pooled) {
      scores.push_back(ps.score);
      labels.push_back(ps.label);
    }
    try {
      report.pooled_auroc = roc_auc(scores, labels).auroc;
    } catch (const OneClassOnly&) {
    }
  }
  return report;
}

}  // namespace afrkit
