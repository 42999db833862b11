#pragma once

// Risk-prediction protocol: median imputation, standardization, mRMR feature
// selection, a random forest trained from scratch, patient-level vote
// aggregation, ROC/AUROC, sequential model-based hyperparameter search, all
// inside a patient-grouped nested cross-validation.
//
// Leakage discipline: imputer medians, scaler moments, the mRMR ranking and
// the tuned hyperparameters are functions of each outer-training split only;
// every fold report carries the patient ids its preprocessing was fitted on
// so tests can assert this directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "afrkit/common.hpp"

namespace afrkit {

using Matrix = std::vector<std::vector<double>>;

// --- cohort table ------------------------------------------------------------

// Rows are (patient, segment); folds split by patient. Labels live on the
// patient, mirrored per row.
struct CohortTable {
  std::vector<std::string> feature_names;
  std::vector<std::string> patient_ids;   // one entry per patient
  std::vector<int> patient_labels;        // 0/1 per patient
  std::vector<std::size_t> row_patient;   // row index -> patient index
  Matrix rows;

  std::size_t n_features() const { return feature_names.size(); }
  std::size_t n_patients() const { return patient_ids.size(); }
};

// --- imputation & scaling ----------------------------------------------------

struct MedianImputer {
  std::vector<double> medians;       // per column; NaN for dropped columns
  std::vector<std::size_t> dropped;  // all-missing training columns

  static MedianImputer fit(const Matrix& train) {
    MedianImputer imp;
    if (train.empty()) return imp;
    const std::size_t nf = train[0].size();
    imp.medians.assign(nf, kMissing);
    for (std::size_t f = 0; f < nf; ++f) {
      std::vector<double> present;
      for (const auto& row : train)
        if (!is_missing(row[f])) present.push_back(row[f]);
      if (present.empty()) {
        imp.dropped.push_back(f);
        continue;
      }
      std::sort(present.begin(), present.end());
      const std::size_t n = present.size();
      imp.medians[f] = n % 2 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
    }
    return imp;
  }

  // Dropped columns are zeroed everywhere; they carry no information and are
  // excluded from selection via usable().
  void apply(Matrix& rows) const {
    for (auto& row : rows)
      for (std::size_t f = 0; f < row.size() && f < medians.size(); ++f) {
        if (is_missing(medians[f])) row[f] = 0.0;
        else if (is_missing(row[f])) row[f] = medians[f];
      }
  }

  std::vector<bool> usable(std::size_t nf) const {
    std::vector<bool> mask(nf, true);
    for (std::size_t f : dropped)
      if (f < nf) mask[f] = false;
    return mask;
  }
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> sd;  // 0 for constant columns

  static Standardizer fit(const Matrix& train) {
    Standardizer sc;
    if (train.empty()) return sc;
    const std::size_t nf = train[0].size();
    sc.mean.assign(nf, 0.0);
    sc.sd.assign(nf, 0.0);
    const double n = static_cast<double>(train.size());
    for (const auto& row : train)
      for (std::size_t f = 0; f < nf; ++f) sc.mean[f] += row[f];
    for (double& m : sc.mean) m /= n;
    for (const auto& row : train)
      for (std::size_t f = 0; f < nf; ++f) {
        const double d = row[f] - sc.mean[f];
        sc.sd[f] += d * d;
      }
    for (double& s : sc.sd) s = std::sqrt(s / n);
    return sc;
  }

  void apply(Matrix& rows) const {
    for (auto& row : rows)
      for (std::size_t f = 0; f < row.size() && f < mean.size(); ++f)
        row[f] = sd[f] > 0 ? (row[f] - mean[f]) / sd[f] : 0.0;
  }
};

// --- mRMR --------------------------------------------------------------------

namespace detail {

// One-way ANOVA F statistic of a feature against the binary label.
inline double f_statistic(const Matrix& X, const std::vector<int>& y, std::size_t f) {
  double sum0 = 0, sum1 = 0;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (y[i]) { sum1 += X[i][f]; ++n1; } else { sum0 += X[i][f]; ++n0; }
  }
  if (n0 == 0 || n1 == 0) return 0.0;
  const double m0 = sum0 / static_cast<double>(n0);
  const double m1 = sum1 / static_cast<double>(n1);
  const double m = (sum0 + sum1) / static_cast<double>(n0 + n1);
  const double ssb = static_cast<double>(n0) * (m0 - m) * (m0 - m) +
                     static_cast<double>(n1) * (m1 - m) * (m1 - m);
  double ssw = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double mu = y[i] ? m1 : m0;
    ssw += (X[i][f] - mu) * (X[i][f] - mu);
  }
  const double df2 = static_cast<double>(n0 + n1 - 2);
  if (ssw <= 0.0) return ssb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return ssb / (ssw / df2);
}

inline double abs_pearson(const Matrix& X, std::size_t a, std::size_t b) {
  const double n = static_cast<double>(X.size());
  double sa = 0, sb = 0;
  for (const auto& row : X) { sa += row[a]; sb += row[b]; }
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (const auto& row : X) {
    const double da = row[a] - ma, db = row[b] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0 || vb <= 0) return 0.0;
  return std::fabs(cov / std::sqrt(va * vb));
}

}  // namespace detail

// Greedy forward mRMR, difference form: F-statistic relevance minus mean
// absolute Pearson correlation with the already-selected set. The F value is
// mapped through sqrt(F / (F + df)) — the point-biserial correlation
// magnitude — so relevance and redundancy live on the same [0, 1] scale and
// the redundancy penalty can actually reject near-duplicates. Ties break on
// column order.
inline std::vector<std::size_t> mrmr_select(const Matrix& X, const std::vector<int>& y,
                                            std::size_t k,
                                            const std::vector<bool>* usable = nullptr) {
  if (X.empty()) return {};
  const std::size_t nf = X[0].size();
  if (k > nf) throw ConfigError("mRMR k exceeds feature count");

  std::vector<std::size_t> candidates;
  for (std::size_t f = 0; f < nf; ++f)
    if (!usable || (*usable)[f]) candidates.push_back(f);
  k = std::min(k, candidates.size());

  const double df2 = std::max(1.0, static_cast<double>(X.size()) - 2.0);
  std::vector<double> relevance(nf, 0.0);
  for (std::size_t f : candidates) {
    const double fstat = detail::f_statistic(X, y, f);
    relevance[f] = std::isinf(fstat) ? 1.0 : std::sqrt(fstat / (fstat + df2));
  }

  std::vector<std::size_t> selected;
  std::vector<bool> taken(nf, false);
  std::vector<double> redundancy_sum(nf, 0.0);
  while (selected.size() < k) {
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_f = nf;
    for (std::size_t f : candidates) {
      if (taken[f]) continue;
      double score = relevance[f];
      if (!selected.empty())
        score -= redundancy_sum[f] / static_cast<double>(selected.size());
      if (score > best_score) {
        best_score = score;
        best_f = f;
      }
    }
    if (best_f == nf) break;
    taken[best_f] = true;
    selected.push_back(best_f);
    for (std::size_t f : candidates)
      if (!taken[f]) redundancy_sum[f] += detail::abs_pearson(X, f, best_f);
  }
  return selected;
}

// --- random forest -----------------------------------------------------------

enum class SplitFeatures { Sqrt, Log2, Fraction };

struct HyperParams {
  int n_trees = 300;      // [50, 500]
  int max_depth = 8;      // [2, 12]
  int min_leaf = 1;       // [1, 8]
  SplitFeatures split_mode = SplitFeatures::Sqrt;
  double split_fraction = 0.5;  // (0, 1], used for SplitFeatures::Fraction
  bool balanced = false;

  void validate() const {
    if (n_trees < 50 || n_trees > 500) throw ConfigError("n_trees outside [50, 500]");
    if (max_depth < 2 || max_depth > 12) throw ConfigError("max_depth outside [2, 12]");
    if (min_leaf < 1 || min_leaf > 8) throw ConfigError("min_leaf outside [1, 8]");
    if (split_fraction <= 0 || split_fraction > 1)
      throw ConfigError("split_fraction outside (0, 1]");
  }

  std::string split_mode_name() const {
    switch (split_mode) {
      case SplitFeatures::Sqrt: return "sqrt";
      case SplitFeatures::Log2: return "log2";
      default: return "fraction";
    }
  }
};

namespace detail {

struct TreeNode {
  int feature = -1;   // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  int vote = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;

  int predict(const std::vector<double>& row) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(i)];
      i = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].vote;
  }
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<int>& y, const HyperParams& hp,
              double w0, double w1, Rng rng)
      : X_(X), y_(y), hp_(hp), w0_(w0), w1_(w1), rng_(rng) {
    const std::size_t nf = X.empty() ? 0 : X[0].size();
    switch (hp.split_mode) {
      case SplitFeatures::Sqrt:
        m_try_ = static_cast<std::size_t>(std::sqrt(static_cast<double>(nf)));
        break;
      case SplitFeatures::Log2:
        m_try_ = static_cast<std::size_t>(std::log2(std::max<double>(2.0, static_cast<double>(nf))));
        break;
      case SplitFeatures::Fraction:
        m_try_ = static_cast<std::size_t>(std::lround(hp.split_fraction * static_cast<double>(nf)));
        break;
    }
    m_try_ = std::max<std::size_t>(1, std::min(m_try_, nf));
    feature_pool_.resize(nf);
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
  }

  Tree build() {
    std::vector<std::size_t> idx(X_.size());
    for (auto& i : idx) i = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<long>(X_.size()) - 1));
    std::sort(idx.begin(), idx.end());
    Tree tree;
    grow(tree, idx, 0);
    return tree;
  }

 private:
  int grow(Tree& tree, const std::vector<std::size_t>& idx, int depth) {
    double w0 = 0, w1 = 0;
    for (std::size_t i : idx) (y_[i] ? w1 : w0) += weight(y_[i]);
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes.back().vote = w1 > w0 ? 1 : 0;

    if (depth >= hp_.max_depth || w0 == 0.0 || w1 == 0.0 ||
        idx.size() < 2 * static_cast<std::size_t>(hp_.min_leaf)) {
      return node_id;
    }

    // Sample candidate features without replacement.
    const std::size_t nf = feature_pool_.size();
    for (std::size_t i = 0; i < m_try_; ++i) {
      const auto j = static_cast<std::size_t>(
          rng_.uniform_int(static_cast<long>(i), static_cast<long>(nf) - 1));
      std::swap(feature_pool_[i], feature_pool_[j]);
    }

    const double w_total = w0 + w1;
    const double gini_parent = gini(w0, w1);
    double best_gain = 1e-12;
    std::size_t best_feature = nf;
    double best_threshold = 0.0;

    std::vector<std::pair<double, std::size_t>> order(idx.size());
    for (std::size_t c = 0; c < m_try_; ++c) {
      const std::size_t f = feature_pool_[c];
      for (std::size_t i = 0; i < idx.size(); ++i)
        order[i] = {X_[idx[i]][f], idx[i]};
      std::sort(order.begin(), order.end());
      double lw0 = 0, lw1 = 0;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const std::size_t row = order[i].second;
        (y_[row] ? lw1 : lw0) += weight(y_[row]);
        if (order[i].first == order[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = order.size() - nl;
        if (nl < static_cast<std::size_t>(hp_.min_leaf) ||
            nr < static_cast<std::size_t>(hp_.min_leaf))
          continue;
        const double rw0 = w0 - lw0, rw1 = w1 - lw1;
        const double child =
            ((lw0 + lw1) * gini(lw0, lw1) + (rw0 + rw1) * gini(rw0, rw1)) / w_total;
        const double gain = gini_parent - child;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (order[i].first + order[i + 1].first);
        }
      }
    }
    if (best_feature == nf) return node_id;  // no valid split, stay a leaf

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx)
      (X_[i][best_feature] <= best_threshold ? left : right).push_back(i);
    tree.nodes[static_cast<std::size_t>(node_id)].feature = static_cast<int>(best_feature);
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = l;
    tree.nodes[static_cast<std::size_t>(node_id)].right = r;
    return node_id;
  }

  double weight(int label) const { return label ? w1_ : w0_; }
  static double gini(double w0, double w1) {
    const double w = w0 + w1;
    if (w <= 0) return 0.0;
    const double p0 = w0 / w, p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
  }

  const Matrix& X_;
  const std::vector<int>& y_;
  const HyperParams& hp_;
  double w0_, w1_;
  Rng rng_;
  std::size_t m_try_ = 1;
  std::vector<std::size_t> feature_pool_;
};

}  // namespace detail

struct Forest {
  std::vector<detail::Tree> trees;

  // Probability = fraction of trees voting positive, exactly.
  double predict_proba(const std::vector<double>& row) const {
    std::size_t votes = 0;
    for (const auto& t : trees) votes += static_cast<std::size_t>(t.predict(row));
    return static_cast<double>(votes) / static_cast<double>(trees.size());
  }
};

inline Forest rf_train(const Matrix& X, const std::vector<int>& y, const HyperParams& hp,
                       std::uint64_t seed) {
  hp.validate();
  if (X.empty() || X.size() != y.size())
    throw SingleClassTraining("training set is empty or misaligned");
  std::size_t n1 = 0;
  for (int label : y) n1 += static_cast<std::size_t>(label);
  if (n1 == 0 || n1 == y.size())
    throw SingleClassTraining("training labels contain a single class");

  double w0 = 1.0, w1 = 1.0;
  if (hp.balanced) {
    const double n = static_cast<double>(y.size());
    w0 = n / (2.0 * static_cast<double>(y.size() - n1));
    w1 = n / (2.0 * static_cast<double>(n1));
  }

  Rng master(seed);
  Forest forest;
  forest.trees.reserve(static_cast<std::size_t>(hp.n_trees));
  for (int t = 0; t < hp.n_trees; ++t) {
    detail::TreeBuilder builder(X, y, hp, w0, w1, master.spawn(static_cast<std::uint64_t>(t)));
    forest.trees.push_back(builder.build());
  }
  return forest;
}

// --- ROC / AUROC -------------------------------------------------------------

struct RocResult {
  double auroc = 0.0;
  std::vector<std::pair<double, double>> curve;  // (FPR, TPR), threshold sweep
};

inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw OneClassOnly("scores/labels misaligned");
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += static_cast<std::size_t>(l);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw OneClassOnly("need both classes for ROC");

  // Mann-Whitney with average ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  RocResult res;
  res.auroc = (rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0) /
              (static_cast<double>(n_pos) * static_cast<double>(n_neg));

  // Curve: sweep thresholds from high to low.
  std::vector<std::size_t> desc(order.rbegin(), order.rend());
  res.curve.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  i = 0;
  while (i < desc.size()) {
    std::size_t j = i;
    while (j + 1 < desc.size() && scores[desc[j + 1]] == scores[desc[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) (labels[desc[k]] ? tp : fp) += 1;
    res.curve.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                           static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j + 1;
  }
  return res;
}

// Majority-vote share: fraction of segment probabilities above 0.5. The hard
// label requires a strict majority.
struct VoteResult {
  double score = 0.0;
  int label = 0;
};

inline VoteResult vote(const std::vector<double>& segment_probs) {
  if (segment_probs.empty()) throw TooFewBeats("vote needs at least one segment");
  std::size_t pos = 0;
  for (double p : segment_probs) pos += (p > 0.5) ? 1 : 0;
  VoteResult v;
  v.score = static_cast<double>(pos) / static_cast<double>(segment_probs.size());
  v.label = v.score > 0.5 ? 1 : 0;
  return v;
}

}  // namespace afrkit
