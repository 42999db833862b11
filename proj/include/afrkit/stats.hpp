#pragma once

// Paired pre-vs-post significance analysis over the feature table.
//
// The paired t statistic uses the sample standard deviation of the
// differences (n - 1); two-sided p comes from the Student t distribution via
// the regularized incomplete beta function, evaluated to ~1e-15 relative
// accuracy by Lentz's continued fraction.
//
// Mean fold change is the arithmetic mean of per-patient post/pre ratios;
// pairs with a zero pre value are dropped and counted.
//
// Volcano significance has two modes:
//   log2 (default)  p < alpha  and  |log2 mean_fc| >= log2 threshold
//   raw             p < alpha  and  |mean_fc| > 1
// The raw mode reproduces the literal published threshold; the log2 mode is
// the symmetric volcano convention.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "afrkit/common.hpp"

namespace afrkit {

namespace detail {

inline double beta_cont_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta function I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0))
    return std::exp(ln_front) * detail::beta_cont_fraction(a, b, x) / a;
  return 1.0 - std::exp(ln_front) * detail::beta_cont_fraction(b, a, 1.0 - x) / b;
}

// Two-sided p for a Student t statistic with df degrees of freedom.
inline double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  return reg_inc_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct PairedTResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;  // complete pairs used
  bool degenerate = false;  // sd of differences was zero
};

// Pairs with either side missing are dropped.
inline PairedTResult paired_ttest(const std::vector<double>& pre,
                                  const std::vector<double>& post) {
  if (pre.size() != post.size())
    throw TooFewPairs("pre/post vectors differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < pre.size(); ++i)
    if (!is_missing(pre[i]) && !is_missing(post[i])) d.push_back(post[i] - pre[i]);
  if (d.size() < 3)
    throw TooFewPairs("need >= 3 complete pairs, have " + std::to_string(d.size()));

  PairedTResult res;
  res.n = d.size();
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (double x : d) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    res.degenerate = true;
    res.t = mean == 0.0 ? 0.0
                        : (mean > 0 ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity());
    res.p = mean == 0.0 ? 1.0 : 0.0;
    return res;
  }
  res.t = mean / (sd / std::sqrt(n));
  res.p = student_t_two_sided_p(res.t, n - 1.0);
  return res;
}

struct FoldChangeResult {
  double mean_fc = 1.0;
  std::size_t n_used = 0;
  std::size_t dropped_zero_pre = 0;
  bool sign_varies = false;  // per-patient ratios had mixed signs
};

inline FoldChangeResult mean_fold_change(const std::vector<double>& pre,
                                         const std::vector<double>& post) {
  if (pre.size() != post.size())
    throw TooFewPairs("pre/post vectors differ in length");
  FoldChangeResult res;
  double acc = 0.0;
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    if (is_missing(pre[i]) || is_missing(post[i])) continue;
    if (pre[i] == 0.0) {
      ++res.dropped_zero_pre;
      continue;
    }
    const double ratio = post[i] / pre[i];
    (ratio >= 0 ? has_pos : has_neg) = true;
    acc += ratio;
    ++res.n_used;
  }
  if (res.n_used == 0)
    throw AllPairsDegenerate("every pair had a zero or missing pre value");
  res.mean_fc = acc / static_cast<double>(res.n_used);
  res.sign_varies = has_pos && has_neg;
  return res;
}

// --- volcano table -----------------------------------------------------------

struct PairedFeatureTable {
  std::vector<std::string> patients;
  std::vector<std::string> features;
  // [patient][feature], missing = NaN
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

enum class FcMode { Log2, Raw };

struct VolcanoConfig {
  double alpha = 0.05;
  double log2_fc_threshold = 1.0;
  FcMode fc_mode = FcMode::Log2;
};

struct VolcanoRow {
  std::string feature;
  double p_value = 1.0;
  double mean_fc = 1.0;
  double log2_fc = 0.0;
  bool significant = false;
  // supplementary
  std::size_t n_pairs = 0;
  std::size_t dropped_zero_pre = 0;
  bool degenerate = false;
  bool sign_varies = false;
  double p_bh = 1.0;
};

inline bool volcano_predicate(const VolcanoRow& row, const VolcanoConfig& cfg) {
  if (cfg.fc_mode == FcMode::Raw)
    return row.p_value < cfg.alpha && std::fabs(row.mean_fc) > 1.0;
  return row.p_value < cfg.alpha && std::isfinite(row.log2_fc) &&
         std::fabs(row.log2_fc) >= cfg.log2_fc_threshold;
}

inline std::vector<VolcanoRow> volcano(const PairedFeatureTable& table,
                                       const VolcanoConfig& cfg = {}) {
  if (table.patients.size() < 3)
    throw TooFewPairs("volcano needs >= 3 patients");
  const std::size_t nf = table.features.size();
  std::vector<VolcanoRow> rows(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    VolcanoRow& row = rows[f];
    row.feature = table.features[f];
    std::vector<double> pre(table.patients.size()), post(table.patients.size());
    for (std::size_t pidx = 0; pidx < table.patients.size(); ++pidx) {
      pre[pidx] = table.pre[pidx][f];
      post[pidx] = table.post[pidx][f];
    }
    try {
      const PairedTResult t = paired_ttest(pre, post);
      row.p_value = t.p;
      row.n_pairs = t.n;
      row.degenerate = t.degenerate;
    } catch (const TooFewPairs&) {
      row.p_value = 1.0;
      row.n_pairs = 0;
    }
    try {
      const FoldChangeResult fc = mean_fold_change(pre, post);
      row.mean_fc = fc.mean_fc;
      row.dropped_zero_pre = fc.dropped_zero_pre;
      row.sign_varies = fc.sign_varies;
      row.log2_fc = fc.mean_fc > 0 ? std::log2(fc.mean_fc) : kMissing;
    } catch (const AllPairsDegenerate&) {
      row.mean_fc = kMissing;
      row.log2_fc = kMissing;
    }
    row.significant = !is_missing(row.mean_fc) && row.n_pairs >= 3 &&
                      volcano_predicate(row, cfg);
  }

  // Benjamini-Hochberg adjusted p, supplementary only.
  std::vector<std::size_t> order(nf);
  for (std::size_t i = 0; i < nf; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a].p_value < rows[b].p_value;
  });
  double running = 1.0;
  for (std::size_t rank = nf; rank >= 1; --rank) {
    const std::size_t idx = order[rank - 1];
    const double adj =
        rows[idx].p_value * static_cast<double>(nf) / static_cast<double>(rank);
    running = std::min(running, adj);
    rows[idx].p_bh = running;
  }

  std::stable_sort(rows.begin(), rows.end(), [](const VolcanoRow& a, const VolcanoRow& b) {
    if (a.p_value != b.p_value) return a.p_value < b.p_value;
    return a.feature < b.feature;
  });
  return rows;
}

}  // namespace afrkit
