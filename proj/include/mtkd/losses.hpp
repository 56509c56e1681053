#ifndef MTKD_LOSSES_HPP
#define MTKD_LOSSES_HPP

// Distillation losses with analytic gradients w.r.t. student logits.
//
// The KD term softens only the teacher: soft = softmax(v / T) while the
// student enters as softmax(u). The usual T^2-scaled, both-sides-softened
// variant is not implemented.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mtkd/distill_targets.hpp"
#include "mtkd/error.hpp"
#include "mtkd/prob_core.hpp"

namespace mtkd {

enum class Distance { kld, ce };

struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

/// -sum_i target_i * log softmax(student)_i, gradient softmax(student) - target.
inline LossResult cross_entropy(const LogitVector& student, const ProbVector& target) {
  if (student.size() != target.size()) {
    throw InvalidInput("student has " + std::to_string(student.size()) +
                       " classes, target has " + std::to_string(target.size()));
  }
  const std::vector<double> log_p = log_softmax_t(student, 1.0);
  LossResult r;
  r.grad.resize(student.size());
  for (std::size_t i = 0; i < student.size(); ++i) {
    // zero-weight entries contribute exactly 0
    if (target[i] != 0.0) r.value -= target[i] * log_p[i];
    r.grad[i] = std::exp(log_p[i]) - target[i];
  }
  return r;
}

inline LossResult kd_loss(const LogitVector& student, const LogitVector& teacher,
                          double temperature, Distance distance = Distance::kld) {
  const ProbVector soft = soft_label(teacher, temperature);
  LossResult r = cross_entropy(student, soft);
  if (distance == Distance::kld) r.value -= entropy(soft);
  return r;
}

/// Cross-entropy against the interpolated target
/// lambda * one_hot + (1 - lambda) * softmax(teacher / T).
inline LossResult lst_loss(const LogitVector& student, const HardLabel& hard,
                           const LogitVector& teacher, const InterpolationConfig& cfg) {
  const ProbVector soft = soft_label(teacher, cfg.temperature());
  return cross_entropy(student, interpolate_target(hard, soft, cfg.lambda()));
}

/// The same objective written as lambda * CE + (1 - lambda) * KD. Equals
/// lst_loss exactly with Distance::ce; with Distance::kld the value is lower
/// by (1 - lambda) * entropy(soft label) and the gradient is unchanged.
inline LossResult lst_loss_two_term(const LogitVector& student, const HardLabel& hard,
                                    const LogitVector& teacher, const InterpolationConfig& cfg,
                                    Distance distance = Distance::kld) {
  const double lambda = cfg.lambda();
  const LossResult ce = cross_entropy(student, one_hot(hard));
  const LossResult kd = kd_loss(student, teacher, cfg.temperature(), distance);
  LossResult r;
  r.value = lambda * ce.value + (1.0 - lambda) * kd.value;
  r.grad.resize(student.size());
  for (std::size_t i = 0; i < r.grad.size(); ++i) {
    r.grad[i] = lambda * ce.grad[i] + (1.0 - lambda) * kd.grad[i];
  }
  return r;
}

struct KdHeadLogits {
  std::string teacher_id;
  LogitVector logits;
};

struct MultiTaskLogits {
  LogitVector sl_logits;
  std::vector<KdHeadLogits> kd_logits;
};

struct TeacherTarget {
  std::string id;
  LogitVector logits;
  double temperature = 1.0;
};

struct MultiTaskLossResult {
  double value = 0.0;
  std::vector<double> sl_grad;
  std::vector<std::vector<double>> kd_grads;  // same order as MultiTaskLogits::kd_logits
};

/// lambda * CE(u_sl, one_hot) + (1 - lambda) * mean_t CE(u_kd_t, softmax(v_t / T_t)).
///
/// Each teacher is matched to the KD head carrying its id; head and teacher
/// may have a different class count from the SL head.
inline MultiTaskLossResult multitask_loss(const MultiTaskLogits& logits, const HardLabel& hard,
                                          std::span<const TeacherTarget> teachers,
                                          double lambda) {
  detail::check_unit_interval(lambda, "lambda");
  if (teachers.empty()) throw InvalidInput("multitask loss needs at least one teacher");
  if (teachers.size() != logits.kd_logits.size()) {
    throw InvalidInput(std::to_string(teachers.size()) + " teachers for " +
                       std::to_string(logits.kd_logits.size()) + " KD heads");
  }
  std::set<std::string> head_ids;
  for (const auto& h : logits.kd_logits) {
    if (!head_ids.insert(h.teacher_id).second) {
      throw InvalidInput("duplicate KD head id '" + h.teacher_id + "'");
    }
  }

  MultiTaskLossResult r;
  const LossResult sl = cross_entropy(logits.sl_logits, one_hot(hard));
  r.value = lambda * sl.value;
  r.sl_grad = sl.grad;
  for (double& g : r.sl_grad) g *= lambda;

  const double kd_weight = (1.0 - lambda) / static_cast<double>(teachers.size());
  r.kd_grads.resize(logits.kd_logits.size());
  std::set<std::string> seen;
  for (const auto& teacher : teachers) {
    const auto it = std::find_if(logits.kd_logits.begin(), logits.kd_logits.end(),
                                 [&](const KdHeadLogits& h) { return h.teacher_id == teacher.id; });
    if (it == logits.kd_logits.end() || !seen.insert(teacher.id).second) {
      throw InvalidInput("teacher '" + teacher.id + "' has no matching KD head");
    }
    const LossResult kd = cross_entropy(it->logits, soft_label(teacher.logits, teacher.temperature));
    r.value += kd_weight * kd.value;
    auto& g = r.kd_grads[static_cast<std::size_t>(it - logits.kd_logits.begin())];
    g = kd.grad;
    for (double& v : g) v *= kd_weight;
  }
  return r;
}

/// Largest |analytic - numeric| / max(1, |numeric|) over coordinates, using
/// central differences with step h. `loss` maps a point to an object with
/// `.value` and `.grad`.
template <class Loss>
double grad_check(Loss&& loss, std::span<const double> x, double h) {
  const std::vector<double> analytic = loss(x).grad;
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = loss(std::span<const double>(probe)).value;
    probe[i] = orig - h;
    const double down = loss(std::span<const double>(probe)).value;
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace mtkd

#endif  // MTKD_LOSSES_HPP
