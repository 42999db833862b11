#pragma once

// Shared plumbing: error types, missing-value convention, deterministic RNG
// streams, and small string/number helpers used across the toolkit.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace afrkit {

// ---------------------------------------------------------------------------
// Errors

enum class ErrorCode {
  MalformedHeader,
  LeadCountMismatch,
  TruncatedData,
  OutOfBounds,
  DuplicatePatient,
  BadLabel,
  SignalTooShort,
  RegionTooShort,
  InsufficientBeats,
  TooFewBeats,
  SeriesTooShort,
  TooFewPairs,
  AllPairsDegenerate,
  EmptyFiducials,
  SingleClassTraining,
  OneClassOnly,
  TooFewPatients,
  ConfigError,
  IoError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

#define AFRKIT_DEFINE_ERROR(NAME)                          \
  class NAME : public Error {                              \
   public:                                                 \
    explicit NAME(const std::string& what)                 \
        : Error(ErrorCode::NAME, #NAME ": " + what) {}     \
  };

AFRKIT_DEFINE_ERROR(MalformedHeader)
AFRKIT_DEFINE_ERROR(LeadCountMismatch)
AFRKIT_DEFINE_ERROR(TruncatedData)
AFRKIT_DEFINE_ERROR(OutOfBounds)
AFRKIT_DEFINE_ERROR(DuplicatePatient)
AFRKIT_DEFINE_ERROR(BadLabel)
AFRKIT_DEFINE_ERROR(SignalTooShort)
AFRKIT_DEFINE_ERROR(RegionTooShort)
AFRKIT_DEFINE_ERROR(InsufficientBeats)
AFRKIT_DEFINE_ERROR(TooFewBeats)
AFRKIT_DEFINE_ERROR(SeriesTooShort)
AFRKIT_DEFINE_ERROR(TooFewPairs)
AFRKIT_DEFINE_ERROR(AllPairsDegenerate)
AFRKIT_DEFINE_ERROR(EmptyFiducials)
AFRKIT_DEFINE_ERROR(SingleClassTraining)
AFRKIT_DEFINE_ERROR(OneClassOnly)
AFRKIT_DEFINE_ERROR(TooFewPatients)
AFRKIT_DEFINE_ERROR(ConfigError)
AFRKIT_DEFINE_ERROR(IoError)

#undef AFRKIT_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Missing values. Feature matrices use NaN as the missing marker; CSV cells
// for missing values are empty.

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Deterministic RNG. A splitmix64-seeded xoshiro256** stream with local
// uniform/normal transforms, so results do not depend on the standard
// library's distribution implementations.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  // Derive an independent stream, e.g. one per fold or per tree.
  Rng spawn(std::uint64_t stream_id) const {
    std::uint64_t mix = s_[0] ^ (stream_id * 0x9e3779b97f4a7c15ULL);
    std::uint64_t sm = mix + 0x632be59bd9b4e019ULL;
    return Rng(splitmix64(sm));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  long uniform_int(long lo, long hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<long>(next_u64() % span);
  }

  // Standard normal via Box-Muller; one value per call, cache the pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<long>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4] = {};
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Formatting. %.17g round-trips doubles exactly; used wherever artifacts must
// be byte-stable and reloadable.

inline std::string format_double(double v) {
  if (is_missing(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Shorter form for human-facing report columns (still deterministic).
inline std::string format_double_short(double v) {
  if (is_missing(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Strict double parse; empty cell means missing.
inline double parse_double_or_missing(const std::string& cell) {
  const std::string t = trim(cell);
  if (t.empty()) return kMissing;
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw MalformedHeader("not a number: '" + t + "'");
  }
  if (pos != t.size()) throw MalformedHeader("trailing junk in number: '" + t + "'");
  return v;
}

}  // namespace afrkit
