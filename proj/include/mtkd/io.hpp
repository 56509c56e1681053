#ifndef MTKD_IO_HPP
#define MTKD_IO_HPP

// Readers and writers for the on-disk formats used by the command-line tool.
//
//   predictions   {"logits": [...], "label": k}                one JSON object per line
//   hypotheses    {"utt": u, "id": h, "am_logp": a, "lm_logp": l}  one per line
//   alignment     utt<TAB>tok tok tok ...
//   unit map      fine<TAB>coarse
//   posteriors    utt<TAB>token-index<TAB>p0 p1 ... pK-1
//   config        key=value, '#' starts a comment

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mtkd/alignment.hpp"
#include "mtkd/calibration.hpp"
#include "mtkd/error.hpp"
#include "mtkd/prob_core.hpp"
#include "mtkd/temp_fit.hpp"
#include "mtkd/toy_model.hpp"

namespace mtkd::io {

class ParseError : public InvalidInput {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : InvalidInput(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

inline std::string rstrip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) parts.push_back(cur);
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream in(s);
  for (std::string tok; in >> tok;) parts.push_back(tok);
  return parts;
}

inline double parse_double(const std::string& tok, const std::string& source, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(source, line, "not a number: '" + tok + "'");
  }
  if (used != tok.size() || !std::isfinite(v)) {
    throw ParseError(source, line, "not a finite number: '" + tok + "'");
  }
  return v;
}

inline std::size_t parse_index(const std::string& tok, const std::string& source, std::size_t line) {
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(source, line, "not a non-negative integer: '" + tok + "'");
  }
  return static_cast<std::size_t>(std::stoull(tok));
}

}  // namespace detail

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return in;
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Predictions

/// Every record must have the same class count.
inline std::vector<LabeledLogits> read_predictions(std::istream& in,
                                                   const std::string& source = "<input>") {
  std::vector<LabeledLogits> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ParseError(source, no, "invalid JSON");
    }
    if (!j.is_object() || !j.contains("logits") || !j["logits"].is_array() ||
        !j.contains("label") || !j["label"].is_number_integer()) {
      throw ParseError(source, no, "expected {\"logits\": [...], \"label\": int}");
    }
    std::vector<double> logits;
    for (const auto& v : j["logits"]) {
      if (!v.is_number()) throw ParseError(source, no, "non-numeric logit");
      logits.push_back(v.get<double>());
    }
    const auto label = j["label"].get<long long>();
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
      throw ParseError(source, no, "label " + std::to_string(label) + " out of range");
    }
    if (!out.empty() && out.front().logits.size() != logits.size()) {
      throw ParseError(source, no, "expected " + std::to_string(out.front().logits.size()) +
                                       " logits, got " + std::to_string(logits.size()));
    }
    try {
      out.push_back({LogitVector(std::move(logits)), static_cast<std::size_t>(label)});
    } catch (const InvalidInput& e) {
      throw ParseError(source, no, e.what());
    }
  }
  if (out.empty()) throw InvalidInput(source + ": no records");
  return out;
}

inline std::vector<PredictionRecord> to_records(const std::vector<LabeledLogits>& preds,
                                                double temperature = 1.0) {
  std::vector<PredictionRecord> records;
  records.reserve(preds.size());
  for (const auto& p : preds) records.emplace_back(softmax_t(p.logits, temperature), p.label);
  return records;
}

// ---------------------------------------------------------------------------
// Hypotheses

struct UtteranceHypotheses {
  std::string utt;
  std::vector<ScoredHypothesis> hyps;
};

/// Groups lines by "utt" in order of first appearance; hypothesis order
/// within a group follows the file.
inline std::vector<UtteranceHypotheses> read_hypotheses(std::istream& in,
                                                        const std::string& source = "<input>") {
  std::vector<UtteranceHypotheses> out;
  std::map<std::string, std::size_t> index;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (detail::blank(line)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw ParseError(source, no, "invalid JSON");
    }
    if (!j.is_object() || !j.contains("utt") || !j["utt"].is_string() || !j.contains("id") ||
        !j["id"].is_string() || !j.contains("am_logp") || !j["am_logp"].is_number() ||
        !j.contains("lm_logp") || !j["lm_logp"].is_number()) {
      throw ParseError(source, no,
                       "expected {\"utt\": str, \"id\": str, \"am_logp\": num, \"lm_logp\": num}");
    }
    ScoredHypothesis h{j["id"].get<std::string>(), j["am_logp"].get<double>(),
                       j["lm_logp"].get<double>()};
    if (!std::isfinite(h.am_logp) || !std::isfinite(h.lm_logp)) {
      throw ParseError(source, no, "non-finite score");
    }
    const std::string utt = j["utt"].get<std::string>();
    auto [it, inserted] = index.emplace(utt, out.size());
    if (inserted) out.push_back({utt, {}});
    out[it->second].hyps.push_back(std::move(h));
  }
  if (out.empty()) throw InvalidInput(source + ": no hypotheses");
  return out;
}

// ---------------------------------------------------------------------------
// Alignments, unit maps, posteriors

struct UtteranceAlignment {
  std::string utt;
  Alignment alignment;
};

inline std::vector<UtteranceAlignment> read_alignments(std::istream& in, const std::string& unit,
                                                       const std::string& source = "<input>") {
  std::vector<UtteranceAlignment> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    line = detail::rstrip_cr(line);
    if (detail::blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError(source, no, "expected utt-id<TAB>tokens");
    }
    out.push_back({line.substr(0, tab), {detail::split_ws(line.substr(tab + 1)), unit}});
  }
  return out;
}

inline UnitMap read_unit_map(std::istream& in, const std::string& source_unit,
                             const std::string& target_unit,
                             const std::string& source = "<input>") {
  UnitMap m{{}, source_unit, target_unit};
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    line = detail::rstrip_cr(line);
    if (detail::blank(line)) continue;
    const auto parts = detail::split(line, '\t');
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
      throw ParseError(source, no, "expected fine<TAB>coarse");
    }
    const auto [it, inserted] = m.mapping.emplace(parts[0], parts[1]);
    if (!inserted && it->second != parts[1]) {
      throw ParseError(source, no, "token '" + parts[0] + "' mapped twice");
    }
  }
  return m;
}

// Posterior files are usually written with limited precision, so rows are
// renormalized when their sum is within this distance of 1.
inline constexpr double kPosteriorSumTolerance = 1e-3;

/// Posteriors per utterance, ordered by token index. Indices must cover
/// 0..m-1 exactly once.
inline std::map<std::string, std::vector<ProbVector>> read_posteriors(
    std::istream& in, const std::string& source = "<input>") {
  std::map<std::string, std::map<std::size_t, ProbVector>> by_utt;
  std::size_t k = 0;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    line = detail::rstrip_cr(line);
    if (detail::blank(line)) continue;
    const auto parts = detail::split(line, '\t');
    if (parts.size() != 3) throw ParseError(source, no, "expected utt<TAB>index<TAB>probs");
    const std::size_t idx = detail::parse_index(parts[1], source, no);
    std::vector<double> p;
    double sum = 0.0;
    for (const auto& tok : detail::split_ws(parts[2])) {
      p.push_back(detail::parse_double(tok, source, no));
      if (p.back() < 0.0) throw ParseError(source, no, "negative probability");
      sum += p.back();
    }
    if (p.empty()) throw ParseError(source, no, "empty posterior");
    if (k == 0) k = p.size();
    if (p.size() != k) {
      throw ParseError(source, no, "expected " + std::to_string(k) + " probabilities, got " +
                                       std::to_string(p.size()));
    }
    if (std::abs(sum - 1.0) > kPosteriorSumTolerance) {
      throw ParseError(source, no, "probabilities sum to " + std::to_string(sum));
    }
    for (double& v : p) v /= sum;
    if (!by_utt[parts[0]].emplace(idx, ProbVector(std::move(p))).second) {
      throw ParseError(source, no, "duplicate token index " + std::to_string(idx));
    }
  }
  std::map<std::string, std::vector<ProbVector>> out;
  for (auto& [utt, rows] : by_utt) {
    auto& vec = out[utt];
    for (auto& [idx, p] : rows) {
      if (idx != vec.size()) {
        throw InvalidInput(source + ": utterance '" + utt + "' is missing token index " +
                           std::to_string(vec.size()));
      }
      vec.push_back(std::move(p));
    }
  }
  return out;
}

inline std::string format_targets(const std::string& utt, const std::vector<TargetSet>& targets) {
  std::string out;
  for (std::size_t f = 0; f < targets.size(); ++f) {
    out += utt + '\t' + std::to_string(f) + '\t' + targets[f].hard_label;
    for (const auto& s : targets[f].soft) {
      out += '\t' + s.teacher_id + '=';
      for (std::size_t i = 0; i < s.probs.size(); ++i) {
        if (i) out += ' ';
        out += format_fixed(s.probs[i]);
      }
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// key=value configuration

inline std::map<std::string, std::string> read_key_values(std::istream& in,
                                                          const std::string& source = "<input>") {
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    line = detail::rstrip_cr(line);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (detail::blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, no, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, no, "empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

/// Applies recognised keys to `cfg`; unknown keys are an error.
inline void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
  auto num = [](const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || !std::isfinite(d)) {
      throw InvalidInput("config key '" + key + "': not a number: '" + v + "'");
    }
    return d;
  };
  auto count = [&](const std::string& key, const std::string& v) {
    const double d = num(key, v);
    if (d < 0 || d != std::floor(d)) {
      throw InvalidInput("config key '" + key + "': expected a non-negative integer");
    }
    return static_cast<std::size_t>(d);
  };

  std::string method = method_name(cfg.train.method);
  double lambda = 0.5, epsilon = 0.1;
  double temperature = -1.0;
  for (const auto& [key, v] : kv) {
    if (key == "method") method = v;
    else if (key == "lambda") lambda = num(key, v);
    else if (key == "epsilon") epsilon = num(key, v);
    else if (key == "temperature") temperature = num(key, v);
    else if (key == "epochs") cfg.train.epochs = count(key, v);
    else if (key == "learning_rate") cfg.train.learning_rate = num(key, v);
    else if (key == "batch_size") cfg.train.batch_size = count(key, v);
    else if (key == "seed") cfg.train.seed = count(key, v);
    else if (key == "classes") cfg.num_classes = count(key, v);
    else if (key == "input_dim") cfg.input_dim = count(key, v);
    else if (key == "hidden") cfg.hidden = count(key, v);
    else if (key == "coarse_classes") cfg.num_coarse = count(key, v);
    else if (key == "noise_sigma") cfg.noise_sigma = num(key, v);
    else if (key == "mean_scale") cfg.mean_scale = num(key, v);
    else if (key == "n_train") cfg.n_train = count(key, v);
    else if (key == "n_test") cfg.n_test = count(key, v);
    else if (key == "teacher_width_factor") cfg.teacher_width_factor = count(key, v);
    else if (key == "teacher_data_factor") cfg.teacher_data_factor = count(key, v);
    else if (key == "teacher_epochs") cfg.teacher_epochs = count(key, v);
    else if (key == "teachers") {
      cfg.teachers.clear();
      for (const auto& t : detail::split(v, ',')) {
        if (!t.empty()) cfg.teachers.push_back(t);
      }
    } else if (key == "lst_temperature") cfg.lst_temperature = num(key, v);
    else if (key == "multitask_temperature") cfg.multitask_temperature = num(key, v);
    else throw InvalidInput("unknown config key '" + key + "'");
  }

  if (method == "baseline") {
    cfg.train.method = method::Baseline{};
  } else if (method == "label_smooth") {
    cfg.train.method = method::LabelSmooth{SmoothingConfig(epsilon).epsilon()};
  } else if (method == "lst") {
    const double t = temperature > 0 ? temperature : cfg.lst_temperature;
    const InterpolationConfig ic(lambda, t);
    cfg.train.method = method::Lst{ic.lambda(), ic.temperature()};
  } else if (method == "multitask") {
    const double t = temperature > 0 ? temperature : cfg.multitask_temperature;
    const InterpolationConfig ic(lambda, t);
    cfg.train.method = method::Multitask{ic.lambda(), ic.temperature()};
  } else {
    throw InvalidInput("unknown method '" + method +
                       "' (expected baseline, label_smooth, lst or multitask)");
  }
}

// ---------------------------------------------------------------------------
// Trained model

inline nlohmann::json model_to_json(const ToyNetwork& net, const std::string& method) {
  auto layer = [](const AffineLayer& l) {
    return nlohmann::json{{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}};
  };
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& h : net.heads()) heads.push_back({{"name", h.name}, {"layer", layer(h.layer)}});
  return {{"format", "mtkd-toy-network"},
          {"method", method},
          {"seed", net.seed()},
          {"trunk", layer(net.trunk())},
          {"heads", heads}};
}

}  // namespace mtkd::io

#endif  // MTKD_IO_HPP
