#ifndef MTKD_TEMP_FIT_HPP
#define MTKD_TEMP_FIT_HPP

// Post-hoc temperature scaling and two-stream score combination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mtkd/error.hpp"
#include "mtkd/prob_core.hpp"

namespace mtkd {

struct LabeledLogits {
  LogitVector logits;
  std::size_t label = 0;
};

struct TemperatureBounds {
  double t_min = 0.05;
  double t_max = 20.0;
};

struct TemperatureFit {
  double t_star = 1.0;
  double nll_at_t_star = 0.0;
  double nll_at_unit = 0.0;
  TemperatureBounds search_bounds;
};

/// Mean of -log softmax(logits / t)[label].
inline double mean_nll(std::span<const LabeledLogits> samples, double t) {
  if (samples.empty()) throw InvalidInput("empty validation set");
  double total = 0.0;
  for (const auto& s : samples) {
    if (s.label >= s.logits.size()) {
      throw InvalidInput("label " + std::to_string(s.label) + " outside [0, " +
                         std::to_string(s.logits.size()) + ")");
    }
    total -= log_softmax_t(s.logits, t)[s.label];
  }
  return total / static_cast<double>(samples.size());
}

/// `count` points evenly spaced in log(t) from lo to hi inclusive.
inline std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  std::vector<double> pts(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    pts[i] = count == 1 ? lo : std::exp(a + (b - a) * static_cast<double>(i) /
                                                static_cast<double>(count - 1));
  }
  pts.front() = lo;
  pts.back() = hi;
  return pts;
}

struct ScalarMinimum {
  double x = 0.0;
  double f = 0.0;
};

/// Golden-section search on [lo, hi] until the bracket is narrower than tol.
inline ScalarMinimum golden_section_minimize(const std::function<double(double)>& f, double lo,
                                             double hi, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo >= tol) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = f(d);
    }
  }
  const double x = 0.5 * (lo + hi);
  return {x, f(x)};
}

inline constexpr std::size_t kTemperatureGridPoints = 64;
inline constexpr double kTemperatureTolerance = 1e-4;

/// Minimizes mean NLL over t: a 64-point log-spaced grid (t = 1 included when
/// inside the bounds), then golden-section refinement between the best grid
/// point's neighbours. The best point seen is returned, so the fit is never
/// worse than any grid point.
inline TemperatureFit fit_temperature(std::span<const LabeledLogits> validation,
                                      TemperatureBounds bounds = {}) {
  if (validation.empty()) throw InvalidInput("empty validation set");
  if (!(bounds.t_min > 0.0) || !(bounds.t_min < bounds.t_max) || !std::isfinite(bounds.t_max)) {
    throw InvalidInput("temperature bounds must satisfy 0 < t_min < t_max");
  }
  const auto nll = [&](double t) { return mean_nll(validation, t); };

  const bool unit_inside = bounds.t_min <= 1.0 && 1.0 <= bounds.t_max;
  std::vector<double> grid =
      log_spaced(bounds.t_min, bounds.t_max, kTemperatureGridPoints - (unit_inside ? 1 : 0));
  if (unit_inside) {
    grid.push_back(1.0);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }

  std::vector<double> values(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = nll(grid[i]);
    if (values[i] < values[best]) best = i;
  }

  TemperatureFit fit;
  fit.search_bounds = bounds;
  fit.nll_at_unit = unit_inside ? values[static_cast<std::size_t>(
                                      std::find(grid.begin(), grid.end(), 1.0) - grid.begin())]
                                : nll(1.0);
  fit.t_star = grid[best];
  fit.nll_at_t_star = values[best];

  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  if (hi > lo) {
    const ScalarMinimum refined = golden_section_minimize(nll, lo, hi, kTemperatureTolerance);
    if (refined.f < fit.nll_at_t_star) {
      fit.t_star = refined.x;
      fit.nll_at_t_star = refined.f;
    }
  }
  return fit;
}

struct ScoredHypothesis {
  std::string id;
  double am_logp = 0.0;
  double lm_logp = 0.0;
};

struct CombinedHypothesis {
  std::string id;
  double score = 0.0;
  std::size_t input_index = 0;
};

struct CombineResult {
  std::string best_id;
  std::vector<CombinedHypothesis> ranked;
};

/// Ranks hypotheses by am_logp / t1 + lm_logp / t2, descending, with ties
/// kept in input order.
inline CombineResult combine_scores(std::span<const ScoredHypothesis> hyps, double t1, double t2) {
  detail::check_temperature(t1);
  detail::check_temperature(t2);
  if (hyps.empty()) throw InvalidInput("no hypotheses to combine");
  CombineResult r;
  r.ranked.reserve(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (!std::isfinite(hyps[i].am_logp) || !std::isfinite(hyps[i].lm_logp)) {
      throw InvalidInput("hypothesis '" + hyps[i].id + "' has a non-finite score");
    }
    r.ranked.push_back({hyps[i].id, hyps[i].am_logp / t1 + hyps[i].lm_logp / t2, i});
  }
  std::stable_sort(r.ranked.begin(), r.ranked.end(),
                   [](const CombinedHypothesis& a, const CombinedHypothesis& b) {
                     return a.score > b.score;
                   });
  r.best_id = r.ranked.front().id;
  return r;
}

}  // namespace mtkd

#endif  // MTKD_TEMP_FIT_HPP
