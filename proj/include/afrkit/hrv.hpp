#pragma once

// The 23 heart-rate-variability features computed from one lead's RR series.
//
//   time domain     AVNN SDNN RMSSD SEM PNN20 PNN50 minRR maxRR medHR maxHR
//   fragmentation   PIP IALS PSS PAS PACEv
//   Poincare        SD1 SD2 SD1SD2
//   geometric       HTI TINN          (1/128 s histogram bins)
//   parabolic map   sq_map_quadratic sq_map_linear sq_map_intercept
//
// The parabolic phase-space features are the least-squares coefficients of
// rr[i+1]^2 = a rr[i]^2 + b rr[i] + c with RR in seconds; a rank-deficient
// fit (e.g. constant RR) returns the minimum-norm solution and raises the
// degenerate flag.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "afrkit/common.hpp"
#include "afrkit/qrs.hpp"
#include "afrkit/signal.hpp"

namespace afrkit {

struct RrSeries {
  std::vector<double> values;  // consecutive RR intervals, ms
  std::string lead;
};

inline RrSeries rr_from_peaks(const PeakList& peaks, const std::string& lead = "") {
  if (peaks.size() < 2) throw TooFewBeats("need at least 2 peaks for an RR series");
  RrSeries rr;
  rr.lead = lead;
  rr.values.reserve(peaks.size() - 1);
  for (std::size_t i = 1; i < peaks.indices.size(); ++i)
    rr.values.push_back(
        static_cast<double>(peaks.indices[i] - peaks.indices[i - 1]) * 1000.0 / peaks.fs);
  return rr;
}

// Drop non-physiological intervals; the only ectopic handling applied.
inline RrSeries filter_rr(const RrSeries& rr, double min_ms = 300.0, double max_ms = 2000.0) {
  RrSeries out;
  out.lead = rr.lead;
  for (double v : rr.values)
    if (v >= min_ms && v <= max_ms) out.values.push_back(v);
  return out;
}

inline constexpr std::size_t kNumHrvFeatures = 23;

inline const std::array<std::string, kNumHrvFeatures>& hrv_feature_names() {
  static const std::array<std::string, kNumHrvFeatures> names = {
      "AVNN",  "SDNN",  "RMSSD", "SEM",   "PNN20", "PNN50",
      "minRR", "maxRR", "medHR", "maxHR", "PIP",   "IALS",
      "PSS",   "PAS",   "PACEv", "SD1",   "SD2",   "SD1SD2",
      "HTI",   "TINN",  "sq_map_quadratic", "sq_map_linear", "sq_map_intercept"};
  return names;
}

struct HrvResult {
  std::array<double, kNumHrvFeatures> values{};
  bool sq_map_degenerate = false;

  double operator[](const std::string& name) const {
    const auto& names = hrv_feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return values[i];
    throw ConfigError("unknown HRV feature " + name);
  }
};

namespace detail {

// Jacobi eigendecomposition of a symmetric 3x3 matrix; returns eigenvalues
// and an orthonormal eigenvector matrix (columns).
inline void jacobi_eigen3(double a[3][3], double eigval[3], double eigvec[3][3]) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) eigvec[i][j] = (i == j) ? 1.0 : 0.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < 3; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (int i = 0; i < 3; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (int i = 0; i < 3; ++i) {
          const double vip = eigvec[i][p], viq = eigvec[i][q];
          eigvec[i][p] = c * vip - s * viq;
          eigvec[i][q] = s * vip + c * viq;
        }
      }
    }
  }
  for (int i = 0; i < 3; ++i) eigval[i] = a[i][i];
}

// Minimum-norm least squares for the 3-parameter parabolic map, via the
// eigen-pseudoinverse of the normal matrix.
inline std::array<double, 3> parabolic_fit(const std::vector<double>& rr_s, bool& degenerate) {
  double ata[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double aty[3] = {0, 0, 0};
  for (std::size_t i = 0; i + 1 < rr_s.size(); ++i) {
    const double u = rr_s[i];
    const double row[3] = {u * u, u, 1.0};
    const double y = rr_s[i + 1] * rr_s[i + 1];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ata[r][c] += row[r] * row[c];
      aty[r] += row[r] * y;
    }
  }
  double eigval[3], eigvec[3][3];
  jacobi_eigen3(ata, eigval, eigvec);
  double max_ev = 0.0;
  for (double ev : eigval) max_ev = std::max(max_ev, std::fabs(ev));
  const double tol = max_ev * 1e-10;
  degenerate = false;
  std::array<double, 3> x = {0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    if (std::fabs(eigval[k]) <= tol) {
      degenerate = true;
      continue;
    }
    double proj = 0.0;
    for (int i = 0; i < 3; ++i) proj += eigvec[i][k] * aty[i];
    proj /= eigval[k];
    for (int i = 0; i < 3; ++i) x[i] += eigvec[i][k] * proj;
  }
  return x;
}

struct SegmentStats {
  double pip = 0, ials = 0, pss = 0, pas = 0, pacev = 0;
};

inline SegmentStats fragmentation(const std::vector<double>& rr) {
  SegmentStats f;
  const std::size_t n = rr.size();
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) d[i] = rr[i + 1] - rr[i];
  const std::size_t m = d.size();

  // PIP: inflection points (strict sign change of the increment) over the
  // series length.
  std::size_t inflections = 0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    if (d[i] * d[i + 1] < 0) ++inflections;
  f.pip = static_cast<double>(inflections) / static_cast<double>(n);

  auto sign_of = [](double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); };

  // Monotone segments: maximal runs of equal nonzero increment sign.
  std::vector<std::size_t> seg_lengths;
  std::size_t run = 0;
  int prev_sign = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const int s = sign_of(d[i]);
    if (s == 0) {
      if (run) seg_lengths.push_back(run);
      run = 0;
      prev_sign = 0;
      continue;
    }
    if (s == prev_sign) {
      ++run;
    } else {
      if (run) seg_lengths.push_back(run);
      run = 1;
      prev_sign = s;
    }
  }
  if (run) seg_lengths.push_back(run);

  std::size_t total = 0, short_total = 0;
  for (std::size_t len : seg_lengths) {
    total += len;
    if (len < 3) short_total += len;
  }
  f.ials = seg_lengths.empty()
               ? 0.0
               : static_cast<double>(seg_lengths.size()) / static_cast<double>(total);
  f.pss = m ? static_cast<double>(short_total) / static_cast<double>(m) : 0.0;

  // Alternation segments: maximal runs where the increment sign flips at
  // every step; runs of >= 4 increments count.
  std::size_t alt_total = 0;
  std::size_t alt_run = 1;
  for (std::size_t i = 1; i <= m; ++i) {
    const bool flips = i < m && sign_of(d[i]) != 0 && sign_of(d[i - 1]) != 0 &&
                       sign_of(d[i]) == -sign_of(d[i - 1]);
    if (flips) {
      ++alt_run;
    } else {
      if (alt_run >= 4) alt_total += alt_run;
      alt_run = 1;
    }
  }
  f.pas = m ? static_cast<double>(alt_total) / static_cast<double>(m) : 0.0;

  // Variance-normalized alternation index: squared mean of the sign-flipped
  // increment series over the increment variance.
  const double var_d = [&] {
    const double mean_d = mean_of(d);
    double acc = 0.0;
    for (double v : d) acc += (v - mean_d) * (v - mean_d);
    return acc / static_cast<double>(m);
  }();
  if (var_d > 0) {
    double alt_mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) alt_mean += (i % 2 ? -d[i] : d[i]);
    alt_mean /= static_cast<double>(m);
    f.pacev = alt_mean * alt_mean / var_d;
  }
  return f;
}

// Triangular interpolation of the RR histogram (1/128 s bins): least-squares
// triangle through the mode; TINN is its base width, HTI is count/mode.
inline void triangular_features(const std::vector<double>& rr, double& hti, double& tinn) {
  const double bin_w = 1000.0 / 128.0;
  long lo_bin = std::numeric_limits<long>::max(), hi_bin = std::numeric_limits<long>::min();
  for (double v : rr) {
    const long b = static_cast<long>(std::floor(v / bin_w));
    lo_bin = std::min(lo_bin, b);
    hi_bin = std::max(hi_bin, b);
  }
  const std::size_t nbins = static_cast<std::size_t>(hi_bin - lo_bin + 1);
  std::vector<double> hist(nbins, 0.0);
  for (double v : rr) ++hist[static_cast<std::size_t>(std::floor(v / bin_w) - lo_bin)];

  std::size_t peak = 0;
  for (std::size_t i = 1; i < nbins; ++i)
    if (hist[i] > hist[peak]) peak = i;
  const double y = hist[peak];
  hti = static_cast<double>(rr.size()) / y;

  // Separable fit: the left flank error depends only on the left base point,
  // the right flank only on the right one.
  long best_left = static_cast<long>(peak);
  double best_left_err = std::numeric_limits<double>::infinity();
  for (long nb = -1; nb < static_cast<long>(peak); ++nb) {
    // error over bins [0, peak-1] with base at nb
    double err = 0.0;
    for (long i = 0; i < static_cast<long>(peak); ++i) {
      double q = 0.0;
      if (i > nb) q = y * static_cast<double>(i - nb) / static_cast<double>(static_cast<long>(peak) - nb);
      err += (hist[static_cast<std::size_t>(i)] - q) * (hist[static_cast<std::size_t>(i)] - q);
    }
    if (err < best_left_err) {
      best_left_err = err;
      best_left = nb;
    }
  }
  long best_right = static_cast<long>(peak);
  double best_right_err = std::numeric_limits<double>::infinity();
  for (long mb = static_cast<long>(peak) + 1; mb <= static_cast<long>(nbins); ++mb) {
    double err = 0.0;
    for (long i = static_cast<long>(peak) + 1; i < static_cast<long>(nbins); ++i) {
      double q = 0.0;
      if (i < mb) q = y * static_cast<double>(mb - i) / static_cast<double>(mb - static_cast<long>(peak));
      err += (hist[static_cast<std::size_t>(i)] - q) * (hist[static_cast<std::size_t>(i)] - q);
    }
    if (err < best_right_err) {
      best_right_err = err;
      best_right = mb;
    }
  }
  tinn = static_cast<double>(best_right - best_left) * bin_w;
  if (nbins == 1) tinn = 0.0;
}

}  // namespace detail

inline HrvResult hrv_features(const RrSeries& rr, std::size_t min_intervals = 10) {
  const auto& v = rr.values;
  const std::size_t n = v.size();
  if (n < min_intervals)
    throw SeriesTooShort("need >= " + std::to_string(min_intervals) + " RR intervals, have " +
                         std::to_string(n));
  for (double x : v)
    if (x <= 0) throw SeriesTooShort("RR intervals must be positive");

  HrvResult out;
  auto set = [&](const std::string& name, double value) {
    const auto& names = hrv_feature_names();
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) {
        out.values[i] = value;
        return;
      }
  };

  const double avnn = mean_of(v);
  const double sdnn = sample_std_of(v);
  std::vector<double> d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) d[i] = v[i + 1] - v[i];
  double rmssd = 0.0;
  std::size_t nn20 = 0, nn50 = 0;
  for (double x : d) {
    rmssd += x * x;
    if (std::fabs(x) > 20.0) ++nn20;
    if (std::fabs(x) > 50.0) ++nn50;
  }
  rmssd = std::sqrt(rmssd / static_cast<double>(d.size()));

  std::vector<double> hr(n);
  for (std::size_t i = 0; i < n; ++i) hr[i] = 60000.0 / v[i];

  set("AVNN", avnn);
  set("SDNN", sdnn);
  set("RMSSD", rmssd);
  set("SEM", sdnn / std::sqrt(static_cast<double>(n)));
  set("PNN20", static_cast<double>(nn20) / static_cast<double>(d.size()));
  set("PNN50", static_cast<double>(nn50) / static_cast<double>(d.size()));
  set("minRR", *std::min_element(v.begin(), v.end()));
  set("maxRR", *std::max_element(v.begin(), v.end()));
  set("medHR", median_of(hr));
  set("maxHR", *std::max_element(hr.begin(), hr.end()));

  const auto frag = detail::fragmentation(v);
  set("PIP", frag.pip);
  set("IALS", frag.ials);
  set("PSS", frag.pss);
  set("PAS", frag.pas);
  set("PACEv", frag.pacev);

  const double var_d_pop = [&] {
    const double m = mean_of(d);
    double acc = 0.0;
    for (double x : d) acc += (x - m) * (x - m);
    return acc / static_cast<double>(d.size());
  }();
  const double var_rr_pop = [&] {
    double acc = 0.0;
    for (double x : v) acc += (x - avnn) * (x - avnn);
    return acc / static_cast<double>(n);
  }();
  const double sd1 = std::sqrt(var_d_pop / 2.0);
  const double sd2 = std::sqrt(std::max(0.0, 2.0 * var_rr_pop - var_d_pop / 2.0));
  set("SD1", sd1);
  set("SD2", sd2);
  set("SD1SD2", sd2 > 0 ? sd1 / sd2 : 0.0);

  double hti = 0.0, tinn = 0.0;
  detail::triangular_features(v, hti, tinn);
  set("HTI", hti);
  set("TINN", tinn);

  std::vector<double> rr_s(n);
  for (std::size_t i = 0; i < n; ++i) rr_s[i] = v[i] / 1000.0;
  const auto coeffs = detail::parabolic_fit(rr_s, out.sq_map_degenerate);
  set("sq_map_quadratic", coeffs[0]);
  set("sq_map_linear", coeffs[1]);
  set("sq_map_intercept", coeffs[2]);
  return out;
}

}  // namespace afrkit
