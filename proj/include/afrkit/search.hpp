#pragma once

// Sequential model-based hyperparameter search. The first third of the
// budget comes from a rotated Halton sequence; the remainder is proposed by
// a factorized Parzen density-ratio acquisition (TPE style): at each step
// the history splits into the top quartile and the rest, candidates are
// drawn from the good-side densities and ranked by log l_good - log l_bad.
// Everything is a pure function of the seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "afrkit/common.hpp"

namespace afrkit {

struct ParamDomain {
  enum class Kind { Integer, Real, Categorical } kind = Kind::Real;
  double lo = 0.0, hi = 1.0;  // inclusive bounds for Integer/Real
  int n_cat = 0;

  static ParamDomain integer(double lo, double hi) {
    return {Kind::Integer, lo, hi, 0};
  }
  static ParamDomain real(double lo, double hi) { return {Kind::Real, lo, hi, 0}; }
  static ParamDomain categorical(int n) { return {Kind::Categorical, 0, 0, n}; }
};

struct SearchResult {
  std::vector<double> best;   // encoded point (categorical dims hold indices)
  double best_objective = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::vector<double>, double>> history;
};

namespace detail {

inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

inline double decode_dim(const ParamDomain& d, double unit) {
  unit = std::clamp(unit, 0.0, 1.0 - 1e-12);
  switch (d.kind) {
    case ParamDomain::Kind::Integer:
      return d.lo + std::floor(unit * (d.hi - d.lo + 1.0));
    case ParamDomain::Kind::Real:
      return d.lo + unit * (d.hi - d.lo);
    default:
      return std::floor(unit * static_cast<double>(d.n_cat));
  }
}

inline double clamp_dim(const ParamDomain& d, double v) {
  switch (d.kind) {
    case ParamDomain::Kind::Integer:
      return std::clamp(std::round(v), d.lo, d.hi);
    case ParamDomain::Kind::Real:
      return std::clamp(v, d.lo, d.hi);
    default:
      return std::clamp(std::round(v), 0.0, static_cast<double>(d.n_cat - 1));
  }
}

class ParzenSide {
 public:
  ParzenSide(const std::vector<const std::vector<double>*>& points,
             const std::vector<ParamDomain>& space)
      : points_(points), space_(space) {
    bw_.resize(space.size());
    for (std::size_t d = 0; d < space.size(); ++d) {
      const auto& dom = space[d];
      if (dom.kind == ParamDomain::Kind::Categorical) continue;
      const double span = dom.hi - dom.lo;
      bw_[d] = std::max(span / 20.0,
                        span / std::sqrt(static_cast<double>(points.size()) + 1.0));
    }
  }

  double sample_dim(std::size_t d, Rng& rng) const {
    const auto& dom = space_[d];
    if (dom.kind == ParamDomain::Kind::Categorical) {
      // Dirichlet-smoothed draw from observed categories.
      std::vector<double> w(static_cast<std::size_t>(dom.n_cat), 1.0);
      for (const auto* p : points_) ++w[static_cast<std::size_t>((*p)[d])];
      double total = 0.0;
      for (double x : w) total += x;
      double u = rng.uniform() * total;
      for (std::size_t c = 0; c < w.size(); ++c) {
        u -= w[c];
        if (u <= 0) return static_cast<double>(c);
      }
      return static_cast<double>(dom.n_cat - 1);
    }
    const auto pick = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<long>(points_.size()) - 1));
    return clamp_dim(dom, (*points_[pick])[d] + rng.normal(0.0, bw_[d]));
  }

  double log_density_dim(std::size_t d, double v) const {
    const auto& dom = space_[d];
    if (dom.kind == ParamDomain::Kind::Categorical) {
      double count = 1.0;  // +1 smoothing
      for (const auto* p : points_) count += ((*p)[d] == v) ? 1.0 : 0.0;
      return std::log(count / (static_cast<double>(points_.size()) +
                               static_cast<double>(dom.n_cat)));
    }
    const double bw = bw_[d];
    double density = 1e-12 / std::max(1e-12, dom.hi - dom.lo);  // uniform floor
    for (const auto* p : points_) {
      const double z = (v - (*p)[d]) / bw;
      density += std::exp(-0.5 * z * z) / (bw * std::sqrt(2.0 * M_PI) *
                                           static_cast<double>(points_.size()));
    }
    return std::log(density);
  }

 private:
  std::vector<const std::vector<double>*> points_;
  const std::vector<ParamDomain>& space_;
  std::vector<double> bw_;
};

}  // namespace detail

// The objective receives the encoded point and its evaluation index (useful
// for deriving per-evaluation RNG streams); higher is better.
inline SearchResult hyper_search(
    const std::function<double(const std::vector<double>&, std::size_t)>& objective,
    const std::vector<ParamDomain>& space, std::size_t budget, std::uint64_t seed) {
  if (budget < 10) throw ConfigError("hyper_search requires a budget of >= 10 evaluations");
  static constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (space.size() > std::size(kPrimes))
    throw ConfigError("search space has too many dimensions");

  Rng rng(seed);
  std::vector<double> rotation(space.size());
  for (auto& r : rotation) r = rng.uniform();

  SearchResult result;
  auto evaluate = [&](const std::vector<double>& point) {
    const double value = objective(point, result.history.size());
    result.history.emplace_back(point, value);
    if (value > result.best_objective) {
      result.best_objective = value;
      result.best = point;
    }
  };

  const std::size_t n_init = (budget + 2) / 3;
  for (std::size_t i = 0; i < n_init; ++i) {
    std::vector<double> point(space.size());
    for (std::size_t d = 0; d < space.size(); ++d) {
      double u = detail::halton(i + 20, kPrimes[d]) + rotation[d];
      u -= std::floor(u);
      point[d] = detail::decode_dim(space[d], u);
    }
    evaluate(point);
  }

  const std::size_t n_candidates = 24;
  while (result.history.size() < budget) {
    std::vector<std::size_t> order(result.history.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return result.history[a].second > result.history[b].second;
    });
    const std::size_t n_good =
        std::max<std::size_t>(2, (order.size() + 3) / 4);
    std::vector<const std::vector<double>*> good, bad;
    for (std::size_t i = 0; i < order.size(); ++i)
      (i < n_good ? good : bad).push_back(&result.history[order[i]].first);
    if (bad.empty()) bad = good;

    detail::ParzenSide good_side(good, space);
    detail::ParzenSide bad_side(bad, space);

    std::vector<double> best_candidate;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < n_candidates; ++c) {
      std::vector<double> cand(space.size());
      double score = 0.0;
      for (std::size_t d = 0; d < space.size(); ++d) {
        cand[d] = good_side.sample_dim(d, rng);
        score += good_side.log_density_dim(d, cand[d]) -
                 bad_side.log_density_dim(d, cand[d]);
      }
      if (score > best_score) {
        best_score = score;
        best_candidate = std::move(cand);
      }
    }
    evaluate(best_candidate);
  }
  return result;
}

}  // namespace afrkit
