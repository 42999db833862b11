#pragma once

// Independent oracles used by the test suites. These deliberately take
// different algorithmic routes than the library:
//   - Student t two-sided p via adaptive Simpson quadrature of the density;
//   - AUROC via brute-force pairwise concordance counting;
//   - minimum-norm least squares via the ridge limit of the normal equations
//     solved by Cramer's rule.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracles {

inline double student_t_pdf(double u, double df) {
  const double ln = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                    0.5 * std::log(df * M_PI) -
                    (df + 1.0) / 2.0 * std::log1p(u * u / df);
  return std::exp(ln);
}

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      double fa, double fm, double fb, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, fa, flm, fm, eps / 2.0, depth - 1) +
         simpson(f, m, b, fm, frm, fb, eps / 2.0, depth - 1);
}

// Two-sided p = 1 - integral of the t density over [-|t|, |t|], by quadrature.
inline double t_two_sided_p_quadrature(double t, double df) {
  const double a = 0.0, b = std::fabs(t);
  if (b == 0.0) return 1.0;
  auto f = [df](double u) { return student_t_pdf(u, df); };
  const double integral =
      simpson(f, a, b, f(a), f(0.5 * (a + b)), f(b), 1e-14, 60);
  return std::max(0.0, 1.0 - 2.0 * integral);
}

// AUROC as the mean pairwise concordance, ties counted as 1/2.
inline double auc_brute_force(const std::vector<double>& scores,
                              const std::vector<int>& labels) {
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) concordant += 1.0;
      else if (scores[i] == scores[j]) concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

namespace detail {

// Ridge solve (A^T A + lambda I)^-1 A^T y by Cramer's rule in long double.
inline std::array<double, 3> parabolic_fit_ridge_once(const std::vector<double>& rr_s,
                                                      double lambda_scale) {
  long double ata[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  long double aty[3] = {0, 0, 0};
  for (std::size_t i = 0; i + 1 < rr_s.size(); ++i) {
    const long double u = rr_s[i];
    const long double row[3] = {u * u, u, 1.0L};
    const long double y = static_cast<long double>(rr_s[i + 1]) * rr_s[i + 1];
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ata[r][c] += row[r] * row[c];
      aty[r] += row[r] * y;
    }
  }
  const long double trace = ata[0][0] + ata[1][1] + ata[2][2];
  const long double lambda = lambda_scale * (trace > 0 ? trace : 1.0L);
  for (int i = 0; i < 3; ++i) ata[i][i] += lambda;

  auto det3 = [](const long double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const long double d = det3(ata);
  std::array<double, 3> x{};
  for (int col = 0; col < 3; ++col) {
    long double m[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[i][j] = (j == col) ? aty[i] : ata[i][j];
    x[static_cast<std::size_t>(col)] = static_cast<double>(det3(m) / d);
  }
  return x;
}

}  // namespace detail

// Minimum-norm least squares for rr[i+1]^2 = a rr[i]^2 + b rr[i] + c as the
// ridge limit: two solves at lambda and 4*lambda, Richardson-extrapolated to
// lambda = 0. An algorithmically independent route to the pseudoinverse
// solution that stays stable in long double for the singular case.
inline std::array<double, 3> parabolic_fit_ridge(const std::vector<double>& rr_s) {
  const auto x1 = detail::parabolic_fit_ridge_once(rr_s, 1e-7);
  const auto x2 = detail::parabolic_fit_ridge_once(rr_s, 4e-7);
  std::array<double, 3> x{};
  for (std::size_t i = 0; i < 3; ++i) x[i] = (4.0 * x1[i] - x2[i]) / 3.0;
  return x;
}

// Residual sum of squares of a parabolic-map fit; used to compare fit
// optimality across routes.
inline double parabolic_rss(const std::vector<double>& rr_s, const std::array<double, 3>& c) {
  double rss = 0.0;
  for (std::size_t i = 0; i + 1 < rr_s.size(); ++i) {
    const double u = rr_s[i];
    const double pred = c[0] * u * u + c[1] * u + c[2];
    const double resid = rr_s[i + 1] * rr_s[i + 1] - pred;
    rss += resid * resid;
  }
  return rss;
}

// Deterministic xorshift for test-local randomness (independent of the
// library's RNG).
struct TestRng {
  std::uint64_t state;
  explicit TestRng(std::uint64_t seed) : state(seed * 2654435769ULL + 1) {}
  std::uint64_t next() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  long uniform_int(long lo, long hi) {
    return lo + static_cast<long>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * uniform());
  }
};

}  // namespace oracles
