#ifndef MTKD_PROB_CORE_HPP
#define MTKD_PROB_CORE_HPP

// Probability primitives shared by every other module: validated logit and
// probability vectors, temperature softmax in plain and log form, and
// N-th best class lookup.
//
// Everything is double precision. Softmax is evaluated with max-subtraction,
// so logits of magnitude 1e4 and temperatures down to 1e-3 do not overflow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtkd/error.hpp"

namespace mtkd {

inline constexpr double kSimplexTolerance = 1e-9;

/// Unnormalized class scores. K >= 2, every entry finite.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() < 2) {
      throw InvalidInput("logit vector needs at least 2 classes, got " +
                         std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidInput("logit vector has a non-finite entry");
    }
  }
  LogitVector(std::initializer_list<double> values)
      : LogitVector(std::vector<double>(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// Distribution over K classes: entries in [0,1] summing to 1 within
/// kSimplexTolerance.
class ProbVector {
 public:
  ProbVector() = default;
  explicit ProbVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidInput("probability vector is empty");
    double sum = 0.0;
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidInput("probability entry outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      throw InvalidInput("probability vector sums to " + std::to_string(sum));
    }
  }
  ProbVector(std::initializer_list<double> values)
      : ProbVector(std::vector<double>(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vec() const noexcept { return values_; }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  std::vector<double> values_;
};

namespace detail {

inline void check_temperature(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw InvalidParameter("temperature must be positive and finite, got " +
                           std::to_string(t));
  }
}

// (x_i - max) / t for every i.
inline std::vector<double> shifted_scaled(std::span<const double> logits, double t) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> z(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) z[i] = (logits[i] - mx) / t;
  return z;
}

}  // namespace detail

inline ProbVector softmax_t(const LogitVector& logits, double t) {
  detail::check_temperature(t);
  std::vector<double> p = detail::shifted_scaled(logits.values(), t);
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return ProbVector(std::move(p));
}

inline ProbVector softmax(const LogitVector& logits) { return softmax_t(logits, 1.0); }

inline std::vector<double> log_softmax_t(const LogitVector& logits, double t) {
  detail::check_temperature(t);
  std::vector<double> z = detail::shifted_scaled(logits.values(), t);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v);
  const double lse = std::log(sum);
  for (double& v : z) v -= lse;
  return z;
}

/// Class indices ordered by descending probability, ties by lower index.
inline std::vector<std::size_t> ranked_classes(std::span<const double> probs) {
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  return order;
}

struct RankedClass {
  std::size_t index = 0;
  double confidence = 0.0;
};

/// The n-th best class (1-based n).
inline RankedClass top_n(const ProbVector& probs, std::size_t n) {
  if (n < 1 || n > probs.size()) {
    throw InvalidParameter("rank " + std::to_string(n) + " outside [1, " +
                           std::to_string(probs.size()) + "]");
  }
  // nth_element is not stable on ties, so take the full ranking.
  const std::size_t idx = ranked_classes(probs.values())[n - 1];
  return {idx, probs[idx]};
}

inline double entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.values()) {
    if (v > 0.0) h -= v * std::log(std::max(v, 1e-300));
  }
  return h;
}

}  // namespace mtkd

#endif  // MTKD_PROB_CORE_HPP
