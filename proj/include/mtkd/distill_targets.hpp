#ifndef MTKD_DISTILL_TARGETS_HPP
#define MTKD_DISTILL_TARGETS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mtkd/error.hpp"
#include "mtkd/prob_core.hpp"

namespace mtkd {

class HardLabel {
 public:
  HardLabel(std::size_t class_index, std::size_t num_classes)
      : index_(class_index), k_(num_classes) {
    if (k_ < 1 || index_ >= k_) {
      throw InvalidInput("class index " + std::to_string(index_) + " outside [0, " +
                         std::to_string(k_) + ")");
    }
  }
  std::size_t index() const noexcept { return index_; }
  std::size_t num_classes() const noexcept { return k_; }

 private:
  std::size_t index_;
  std::size_t k_;
};

namespace detail {
inline void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidParameter(std::string(name) + " must lie in [0,1], got " + std::to_string(v));
  }
}
}  // namespace detail

class SmoothingConfig {
 public:
  explicit SmoothingConfig(double epsilon) : epsilon_(epsilon) {
    detail::check_unit_interval(epsilon, "epsilon");
  }
  double epsilon() const noexcept { return epsilon_; }

 private:
  double epsilon_;
};

class InterpolationConfig {
 public:
  InterpolationConfig(double lambda, double temperature)
      : lambda_(lambda), temperature_(temperature) {
    detail::check_unit_interval(lambda, "lambda");
    detail::check_temperature(temperature);
  }
  double lambda() const noexcept { return lambda_; }
  double temperature() const noexcept { return temperature_; }

 private:
  double lambda_;
  double temperature_;
};

inline ProbVector one_hot(const HardLabel& label) {
  std::vector<double> v(label.num_classes(), 0.0);
  v[label.index()] = 1.0;
  return ProbVector(std::move(v));
}

/// True class gets 1 - eps + eps/k, every other class eps/k.
inline ProbVector smooth_label(const HardLabel& label, const SmoothingConfig& cfg) {
  const double k = static_cast<double>(label.num_classes());
  const double eps = cfg.epsilon();
  std::vector<double> v(label.num_classes(), eps / k);
  v[label.index()] = 1.0 - eps + eps / k;
  return ProbVector(std::move(v));
}

inline ProbVector soft_label(const LogitVector& teacher_logits, double temperature) {
  return softmax_t(teacher_logits, temperature);
}

/// lambda * one_hot(hard) + (1 - lambda) * soft.
inline ProbVector interpolate_target(const HardLabel& hard, const ProbVector& soft, double lambda) {
  detail::check_unit_interval(lambda, "lambda");
  if (soft.size() != hard.num_classes()) {
    throw InvalidInput("soft label has " + std::to_string(soft.size()) +
                       " classes, hard label has " + std::to_string(hard.num_classes()));
  }
  std::vector<double> v(soft.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double y = i == hard.index() ? 1.0 : 0.0;
    v[i] = std::min(1.0, lambda * y + (1.0 - lambda) * soft[i]);
  }
  return ProbVector(std::move(v));
}

}  // namespace mtkd

#endif  // MTKD_DISTILL_TARGETS_HPP
