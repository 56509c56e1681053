#ifndef MTKD_ALIGNMENT_HPP
#define MTKD_ALIGNMENT_HPP

// Turning forced alignments plus per-token teacher posteriors into
// frame-wise distillation targets.
//
//   frames --map_units--> coarse frames --deduplicate--> tokens + run lengths
//   teacher(tokens) --> one posterior per token --rearrange--> one per frame

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mtkd/error.hpp"
#include "mtkd/prob_core.hpp"

namespace mtkd {

struct Alignment {
  std::vector<std::string> frames;
  std::string unit;
};

/// Surjective token map from one unit inventory to a coarser one.
struct UnitMap {
  std::map<std::string, std::string> mapping;
  std::string source_unit;
  std::string target_unit;
};

struct RunLengthAlignment {
  std::vector<std::string> labels;
  std::vector<std::size_t> runs;
  std::string unit;

  std::size_t frame_count() const {
    std::size_t n = 0;
    for (std::size_t r : runs) n += r;
    return n;
  }
};

inline Alignment map_units(const Alignment& a, const UnitMap& m) {
  if (a.unit != m.source_unit) {
    throw InvalidInput("alignment unit '" + a.unit + "' does not match map source unit '" +
                       m.source_unit + "'");
  }
  Alignment out;
  out.unit = m.target_unit;
  out.frames.reserve(a.frames.size());
  for (const auto& tok : a.frames) {
    const auto it = m.mapping.find(tok);
    if (it == m.mapping.end()) throw UnmappedToken(tok);
    out.frames.push_back(it->second);
  }
  return out;
}

/// Collapses maximal runs of equal consecutive tokens.
inline RunLengthAlignment deduplicate(const Alignment& a) {
  RunLengthAlignment r;
  r.unit = a.unit;
  for (const auto& tok : a.frames) {
    if (!r.labels.empty() && r.labels.back() == tok) {
      ++r.runs.back();
    } else {
      r.labels.push_back(tok);
      r.runs.push_back(1);
    }
  }
  return r;
}

/// Repeats posterior i runs[i] times, restoring the frame rate.
inline std::vector<ProbVector> rearrange(std::span<const ProbVector> posteriors,
                                         const RunLengthAlignment& rla) {
  if (posteriors.size() != rla.labels.size()) {
    throw InvalidInput("got " + std::to_string(posteriors.size()) + " posteriors for " +
                       std::to_string(rla.labels.size()) + " deduplicated tokens");
  }
  std::vector<ProbVector> out;
  out.reserve(rla.frame_count());
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    out.insert(out.end(), rla.runs[i], posteriors[i]);
  }
  return out;
}

/// Supplies one posterior per deduplicated token of the (mapped) alignment.
using PosteriorProvider = std::function<std::vector<ProbVector>(const RunLengthAlignment&)>;

struct TeacherStream {
  std::string id;
  std::optional<UnitMap> map;  // nullopt: teacher shares the alignment's unit
  PosteriorProvider provider;
};

struct SoftTarget {
  std::string teacher_id;
  ProbVector probs;
};

struct TargetSet {
  std::string hard_label;
  std::vector<SoftTarget> soft;  // one per teacher, in teacher order
};

inline std::vector<TargetSet> build_framewise_targets(const Alignment& a,
                                                      std::span<const TeacherStream> teachers) {
  std::vector<TargetSet> targets(a.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) targets[f].hard_label = a.frames[f];

  for (const auto& teacher : teachers) {
    const Alignment mapped = teacher.map ? map_units(a, *teacher.map) : a;
    const RunLengthAlignment rla = deduplicate(mapped);
    const std::vector<ProbVector> per_token = teacher.provider(rla);
    std::vector<ProbVector> per_frame;
    try {
      per_frame = rearrange(per_token, rla);
    } catch (const InvalidInput& e) {
      throw InvalidInput("teacher '" + teacher.id + "': " + e.what());
    }
    for (std::size_t f = 0; f < per_frame.size(); ++f) {
      targets[f].soft.push_back({teacher.id, std::move(per_frame[f])});
    }
  }
  return targets;
}

}  // namespace mtkd

#endif  // MTKD_ALIGNMENT_HPP
