#ifndef MTKD_CALIBRATION_HPP
#define MTKD_CALIBRATION_HPP

// Top-N expected calibration error with equal-count bins.
//
// For rank N every record contributes the probability of its N-th best class
// as confidence, and counts as correct when that class is the true label.
// Records are sorted by that confidence and cut into b contiguous groups of
// floor(n/b) records, the first n mod b groups taking one extra record.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mtkd/error.hpp"
#include "mtkd/prob_core.hpp"

namespace mtkd {

struct PredictionRecord {
  ProbVector probs;
  std::size_t true_label = 0;

  PredictionRecord() = default;
  PredictionRecord(ProbVector p, std::size_t label) : probs(std::move(p)), true_label(label) {
    if (true_label >= probs.size()) {
      throw InvalidInput("true label " + std::to_string(true_label) + " outside [0, " +
                         std::to_string(probs.size()) + ")");
    }
  }
};

struct BinStats {
  std::size_t count = 0;
  double mean_conf = 0.0;
  double mean_acc = 0.0;
  double gap = 0.0;  // mean_acc - mean_conf
};

struct ReliabilityReport {
  std::size_t rank = 1;
  std::vector<BinStats> bins;
  double ece = 0.0;
  std::size_t n_total = 0;

  /// Pooled (mean confidence - accuracy) over all records.
  double pooled_conf_minus_acc() const {
    double conf = 0.0, acc = 0.0;
    for (const auto& b : bins) {
      conf += b.mean_conf * static_cast<double>(b.count);
      acc += b.mean_acc * static_cast<double>(b.count);
    }
    return (conf - acc) / static_cast<double>(n_total);
  }
};

namespace detail {

struct RankedOutcome {
  double confidence;
  bool correct;
};

inline std::vector<RankedOutcome> ranked_outcomes(std::span<const PredictionRecord> records,
                                                  std::size_t rank) {
  std::vector<RankedOutcome> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const RankedClass rc = top_n(r.probs, rank);
    out.push_back({rc.confidence, rc.index == r.true_label});
  }
  return out;
}

inline void check_binning_args(std::span<const PredictionRecord> records, std::size_t num_bins) {
  if (records.empty()) throw InvalidInput("no prediction records to bin");
  if (num_bins < 1) throw InvalidParameter("number of bins must be >= 1");
}

inline std::vector<std::vector<std::size_t>> split_sorted(std::vector<std::size_t> order,
                                                          std::size_t num_bins) {
  const std::size_t n = order.size();
  const std::size_t base = n / num_bins;
  const std::size_t extra = n % num_bins;
  std::vector<std::vector<std::size_t>> bins;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < num_bins; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    if (size == 0) continue;
    bins.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(pos),
                      order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return bins;
}

inline std::vector<std::vector<std::size_t>> bin_outcomes(
    const std::vector<RankedOutcome>& outcomes, std::size_t num_bins) {
  std::vector<std::size_t> order(outcomes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Equal confidences are ordered incorrect-first so the bin contents, and
  // therefore the ECE, do not depend on input order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (outcomes[a].confidence != outcomes[b].confidence) {
      return outcomes[a].confidence < outcomes[b].confidence;
    }
    return outcomes[a].correct < outcomes[b].correct;
  });
  return split_sorted(std::move(order), num_bins);
}

inline BinStats summarize_bin(const std::vector<RankedOutcome>& outcomes,
                              const std::vector<std::size_t>& members) {
  double conf = 0.0, acc = 0.0;
  for (std::size_t m : members) {
    conf += outcomes[m].confidence;
    acc += outcomes[m].correct ? 1.0 : 0.0;
  }
  BinStats s;
  s.count = members.size();
  s.mean_conf = conf / static_cast<double>(s.count);
  s.mean_acc = acc / static_cast<double>(s.count);
  s.gap = s.mean_acc - s.mean_conf;
  return s;
}

inline double ece_from_bins(const std::vector<BinStats>& bins, std::size_t n) {
  double e = 0.0;
  for (const auto& b : bins) {
    e += static_cast<double>(b.count) / static_cast<double>(n) * std::abs(b.gap);
  }
  return e;
}

}  // namespace detail

/// Index lists into `records`, one per non-empty bin, in ascending
/// confidence order.
inline std::vector<std::vector<std::size_t>> bin_by_confidence(
    std::span<const PredictionRecord> records, std::size_t rank, std::size_t num_bins) {
  detail::check_binning_args(records, num_bins);
  return detail::bin_outcomes(detail::ranked_outcomes(records, rank), num_bins);
}

inline ReliabilityReport ece(std::span<const PredictionRecord> records, std::size_t rank,
                             std::size_t num_bins) {
  detail::check_binning_args(records, num_bins);
  const auto outcomes = detail::ranked_outcomes(records, rank);
  ReliabilityReport report;
  report.rank = rank;
  report.n_total = records.size();
  for (const auto& members : detail::bin_outcomes(outcomes, num_bins)) {
    report.bins.push_back(detail::summarize_bin(outcomes, members));
  }
  report.ece = detail::ece_from_bins(report.bins, report.n_total);
  return report;
}

/// Bins formed inside consecutive mini-batches of `batch_size` records, then
/// pooled. The ECE weights each bin by its share of all records, which equals
/// the record-weighted mean of the per-batch ECEs.
inline ReliabilityReport ece_batched(std::span<const PredictionRecord> records, std::size_t rank,
                                     std::size_t num_bins, std::size_t batch_size) {
  detail::check_binning_args(records, num_bins);
  if (batch_size < 1) throw InvalidParameter("batch size must be >= 1");
  ReliabilityReport report;
  report.rank = rank;
  report.n_total = records.size();
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const auto batch = records.subspan(start, std::min(batch_size, records.size() - start));
    const auto outcomes = detail::ranked_outcomes(batch, rank);
    for (const auto& members : detail::bin_outcomes(outcomes, num_bins)) {
      report.bins.push_back(detail::summarize_bin(outcomes, members));
    }
  }
  std::stable_sort(report.bins.begin(), report.bins.end(),
                   [](const BinStats& a, const BinStats& b) { return a.mean_conf < b.mean_conf; });
  report.ece = detail::ece_from_bins(report.bins, report.n_total);
  return report;
}

/// Fixed-point decimal with `digits` places; never prints "-0.000000".
inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string reliability_csv(const ReliabilityReport& report) {
  std::string out = "rank,bin,count,mean_conf,mean_acc,gap\n";
  for (std::size_t i = 0; i < report.bins.size(); ++i) {
    const auto& b = report.bins[i];
    out += std::to_string(report.rank) + ',' + std::to_string(i) + ',' +
           std::to_string(b.count) + ',' + format_fixed(b.mean_conf) + ',' +
           format_fixed(b.mean_acc) + ',' + format_fixed(b.gap) + '\n';
  }
  return out;
}

}  // namespace mtkd

#endif  // MTKD_CALIBRATION_HPP
