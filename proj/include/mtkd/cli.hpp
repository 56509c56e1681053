#ifndef MTKD_CLI_HPP
#define MTKD_CLI_HPP

// Command-line front end. run_cli() is the whole program; tools/mtkd.cpp
// only forwards argv and the standard streams.
//
// Exit status: 0 success, 2 bad input or usage, 1 anything else.

#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtkd/alignment.hpp"
#include "mtkd/calibration.hpp"
#include "mtkd/error.hpp"
#include "mtkd/io.hpp"
#include "mtkd/temp_fit.hpp"
#include "mtkd/toy_model.hpp"

namespace mtkd::cli {

inline constexpr const char* kVersion = "mtkd 1.0.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

namespace detail {

inline void emit(const std::optional<std::string>& path, const std::string& content,
                 std::ostream& out) {
  if (path) {
    io::write_atomic(*path, content);
  } else {
    out << content;
  }
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

// "id=path" pairs in command-line order.
inline std::vector<std::pair<std::string, std::string>> parse_assignments(
    const std::vector<std::string>& args, const std::string& flag) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size()) {
      throw InvalidInput(flag + " expects ID=FILE, got '" + a + "'");
    }
    out.emplace_back(a.substr(0, eq), a.substr(eq + 1));
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& flag) {
  std::vector<T> out;
  for (const auto& tok : io::detail::split(s, ',')) {
    if (tok.empty()) continue;
    std::istringstream in(tok);
    T v{};
    if (!(in >> v) || !in.eof()) throw InvalidInput(flag + ": bad list entry '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw InvalidInput(flag + " is empty");
  return out;
}

}  // namespace detail

struct EceOptions {
  std::string input;
  std::size_t rank = 1;
  std::size_t bins = 15;
  std::string group = "pooled";
  std::optional<std::string> out;
};

inline int cmd_ece(const EceOptions& o, std::ostream& out) {
  std::ifstream in = io::open_input(o.input);
  const auto records = io::to_records(io::read_predictions(in, o.input));
  ReliabilityReport report;
  if (o.group == "pooled") {
    report = ece(records, o.rank, o.bins);
  } else if (o.group.rfind("batch:", 0) == 0) {
    const auto size = detail::parse_list<std::size_t>(o.group.substr(6), "--group");
    if (size.size() != 1 || size[0] == 0) throw InvalidInput("--group batch:SIZE needs SIZE >= 1");
    report = ece_batched(records, o.rank, o.bins, size[0]);
  } else {
    throw InvalidInput("--group must be 'pooled' or 'batch:SIZE', got '" + o.group + "'");
  }
  detail::emit(o.out, reliability_csv(report), out);
  out << "rank=" << o.rank << " bins=" << o.bins << " ece=" << format_fixed(report.ece)
      << " n=" << report.n_total << '\n';
  return kExitOk;
}

struct FitTempOptions {
  std::string val;
  double t_min = 0.05;
  double t_max = 20.0;
  std::size_t bins = 15;
};

inline int cmd_fit_temp(const FitTempOptions& o, std::ostream& out) {
  std::ifstream in = io::open_input(o.val);
  const auto val = io::read_predictions(in, o.val);
  const TemperatureFit fit = fit_temperature(val, {o.t_min, o.t_max});
  const double ece_before = ece(io::to_records(val, 1.0), 1, o.bins).ece;
  const double ece_after = ece(io::to_records(val, fit.t_star), 1, o.bins).ece;
  out << "t_star=" << format_fixed(fit.t_star) << '\n'
      << "nll_before=" << format_fixed(fit.nll_at_unit) << '\n'
      << "nll_after=" << format_fixed(fit.nll_at_t_star) << '\n'
      << "ece_before=" << format_fixed(ece_before) << '\n'
      << "ece_after=" << format_fixed(ece_after) << '\n';
  return kExitOk;
}

struct CombineOptions {
  std::string hyps;
  double t1 = 1.0;
  double t2 = 1.0;
  std::optional<std::string> out;
};

/// CSV `utt,rank,id,score`; rank 1 is the utterance's best hypothesis.
inline int cmd_combine(const CombineOptions& o, std::ostream& out) {
  std::ifstream in = io::open_input(o.hyps);
  const auto groups = io::read_hypotheses(in, o.hyps);
  std::string csv = "utt,rank,id,score\n";
  std::string summary;
  for (const auto& g : groups) {
    const CombineResult r = combine_scores(g.hyps, o.t1, o.t2);
    for (std::size_t i = 0; i < r.ranked.size(); ++i) {
      csv += detail::csv_field(g.utt) + ',' + std::to_string(i + 1) + ',' +
             detail::csv_field(r.ranked[i].id) + ',' + format_fixed(r.ranked[i].score) + '\n';
    }
    summary += "utt=" + g.utt + " best=" + r.best_id + '\n';
  }
  detail::emit(o.out, csv, out);
  if (o.out) out << summary;
  return kExitOk;
}

struct TargetsOptions {
  std::string align;
  std::string unit = "senone";
  std::vector<std::string> posteriors;  // ID=FILE, defines teachers and their order
  std::vector<std::string> maps;        // ID=FILE, optional per teacher
  std::optional<std::string> out;
};

/// One line per frame: utt, frame index, hard label, then one
/// `teacher=p0 p1 ...` field per teacher.
inline int cmd_targets(const TargetsOptions& o, std::ostream& out) {
  std::ifstream align_in = io::open_input(o.align);
  const auto alignments = io::read_alignments(align_in, o.unit, o.align);

  struct Teacher {
    std::string id;
    std::optional<UnitMap> map;
    std::map<std::string, std::vector<ProbVector>> posteriors;
  };
  std::vector<Teacher> teachers;
  for (const auto& [id, path] : detail::parse_assignments(o.posteriors, "--posteriors")) {
    for (const auto& t : teachers) {
      if (t.id == id) throw InvalidInput("teacher '" + id + "' given twice");
    }
    std::ifstream in = io::open_input(path);
    teachers.push_back({id, std::nullopt, io::read_posteriors(in, path)});
  }
  for (const auto& [id, path] : detail::parse_assignments(o.maps, "--map")) {
    auto it = std::find_if(teachers.begin(), teachers.end(),
                           [&](const Teacher& t) { return t.id == id; });
    if (it == teachers.end()) throw InvalidInput("--map for unknown teacher '" + id + "'");
    std::ifstream in = io::open_input(path);
    it->map = io::read_unit_map(in, o.unit, id, path);
  }

  std::string text;
  for (const auto& ua : alignments) {
    std::vector<TeacherStream> streams;
    for (const auto& t : teachers) {
      const std::string utt = ua.utt;
      const std::string id = t.id;
      const auto* posts = &t.posteriors;
      streams.push_back({t.id, t.map, [utt, id, posts](const RunLengthAlignment&) {
                           const auto it = posts->find(utt);
                           if (it == posts->end()) {
                             throw InvalidInput("teacher '" + id + "' has no posteriors for '" +
                                                utt + "'");
                           }
                           return it->second;
                         }});
    }
    try {
      text += io::format_targets(ua.utt, build_framewise_targets(ua.alignment, streams));
    } catch (const InvalidInput& e) {
      throw InvalidInput("utterance '" + ua.utt + "': " + e.what());
    }
  }
  detail::emit(o.out, text, out);
  return kExitOk;
}

struct TrainOptions {
  std::optional<std::string> config;
  std::vector<std::string> overrides;  // key=value, applied after the config file
  std::optional<std::string> out;
};

inline ExperimentConfig load_experiment_config(const std::optional<std::string>& path,
                                               const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> kv;
  if (path) {
    std::ifstream in = io::open_input(*path);
    kv = io::read_key_values(in, *path);
  }
  for (const auto& a : overrides) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidInput("--set expects key=value");
    kv[a.substr(0, eq)] = a.substr(eq + 1);
  }
  ExperimentConfig cfg;
  io::apply_config(cfg, kv);
  return cfg;
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(o.config, o.overrides);
  const ExperimentWorld world = build_world(cfg, cfg.train.seed);
  const RunResult run = run_experiment(cfg, world, cfg.train.method, cfg.train.seed);
  const std::string name = method_name(cfg.train.method);
  if (o.out) io::write_atomic(*o.out, io::model_to_json(run.net, name).dump(1) + '\n');
  out << "method=" << name << " seed=" << cfg.train.seed
      << " acc=" << format_fixed(run.eval.accuracy);
  for (const auto& rep : run.eval.reports) {
    out << " ece" << rep.rank << '=' << format_fixed(rep.ece);
  }
  out << " final_loss=" << format_fixed(run.loss_curve.back()) << '\n';
  return kExitOk;
}

struct SweepOptions {
  std::optional<std::string> config;
  std::vector<std::string> overrides;
  std::string lambdas = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
  std::string methods = "lst,multitask";
  std::string seeds = "1,2,3";
  std::optional<std::string> out;
};

inline int cmd_sweep(const SweepOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = load_experiment_config(o.config, o.overrides);
  std::vector<std::string> methods;
  for (const auto& m : io::detail::split(o.methods, ',')) {
    if (!m.empty()) methods.push_back(m);
  }
  const auto rows = sweep_lambda(cfg, detail::parse_list<double>(o.lambdas, "--lambdas"), methods,
                                 detail::parse_list<std::uint64_t>(o.seeds, "--seeds"));
  detail::emit(o.out, sweep_csv(rows), out);
  return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distillation losses, top-N calibration and alignment tooling", "mtkd"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  EceOptions ece_o;
  auto* ece_cmd = app.add_subcommand("ece", "Top-N expected calibration error and reliability CSV");
  ece_cmd->set_version_flag("--version", kVersion);
  ece_cmd->add_option("--input", ece_o.input, "Prediction file (JSON lines)")->required();
  ece_cmd->add_option("--rank", ece_o.rank, "N-th best class to evaluate")->capture_default_str();
  ece_cmd->add_option("--bins", ece_o.bins, "Number of equal-count bins")->capture_default_str();
  ece_cmd->add_option("--group", ece_o.group, "pooled or batch:SIZE")->capture_default_str();
  ece_cmd->add_option("--out", ece_o.out, "Reliability CSV path (stdout if omitted)");

  FitTempOptions fit_o;
  auto* fit_cmd = app.add_subcommand("fit-temp", "Fit a post-hoc temperature on validation logits");
  fit_cmd->set_version_flag("--version", kVersion);
  fit_cmd->add_option("--val", fit_o.val, "Validation prediction file")->required();
  fit_cmd->add_option("--t-min", fit_o.t_min, "Lower temperature bound")->capture_default_str();
  fit_cmd->add_option("--t-max", fit_o.t_max, "Upper temperature bound")->capture_default_str();
  fit_cmd->add_option("--bins", fit_o.bins, "Bins for the ECE report")->capture_default_str();

  CombineOptions comb_o;
  auto* comb_cmd = app.add_subcommand("combine", "Rank n-best hypotheses by am/t1 + lm/t2");
  comb_cmd->set_version_flag("--version", kVersion);
  comb_cmd->add_option("--hyps", comb_o.hyps, "Hypothesis file (JSON lines)")->required();
  comb_cmd->add_option("--t1", comb_o.t1, "Acoustic score temperature")->capture_default_str();
  comb_cmd->add_option("--t2", comb_o.t2, "Language score temperature")->capture_default_str();
  comb_cmd->add_option("--out", comb_o.out, "Ranked CSV path (stdout if omitted)");

  TargetsOptions tgt_o;
  auto* tgt_cmd = app.add_subcommand("targets", "Build frame-wise distillation targets");
  tgt_cmd->set_version_flag("--version", kVersion);
  tgt_cmd->add_option("--align", tgt_o.align, "Alignment file")->required();
  tgt_cmd->add_option("--unit", tgt_o.unit, "Unit tag of the alignment")->capture_default_str();
  tgt_cmd->add_option("--posteriors", tgt_o.posteriors, "Teacher posteriors, ID=FILE (repeatable)");
  tgt_cmd->add_option("--map", tgt_o.maps, "Unit map for a teacher, ID=FILE (repeatable)");
  tgt_cmd->add_option("--out", tgt_o.out, "Target file path (stdout if omitted)");

  TrainOptions train_o;
  auto* train_cmd = app.add_subcommand("train", "Train one toy student and report calibration");
  train_cmd->set_version_flag("--version", kVersion);
  train_cmd->add_option("--config", train_o.config, "key=value configuration file");
  train_cmd->add_option("--set", train_o.overrides, "Override a config key, key=value");
  train_cmd->add_option("--out", train_o.out, "Trained model JSON path");

  SweepOptions sweep_o;
  auto* sweep_cmd = app.add_subcommand("sweep", "Lambda sweep over methods and seeds");
  sweep_cmd->set_version_flag("--version", kVersion);
  sweep_cmd->add_option("--config", sweep_o.config, "key=value configuration file");
  sweep_cmd->add_option("--set", sweep_o.overrides, "Override a config key, key=value");
  sweep_cmd->add_option("--lambdas", sweep_o.lambdas, "Comma-separated lambdas")
      ->capture_default_str();
  sweep_cmd->add_option("--methods", sweep_o.methods, "lst and/or multitask")
      ->capture_default_str();
  sweep_cmd->add_option("--seeds", sweep_o.seeds, "Comma-separated seeds")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_o.out, "Results CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*ece_cmd) return cmd_ece(ece_o, out);
    if (*fit_cmd) return cmd_fit_temp(fit_o, out);
    if (*comb_cmd) return cmd_combine(comb_o, out);
    if (*tgt_cmd) return cmd_targets(tgt_o, out);
    if (*train_cmd) return cmd_train(train_o, out);
    if (*sweep_cmd) return cmd_sweep(sweep_o, out);
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const InvalidParameter& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace mtkd::cli

#endif  // MTKD_CLI_HPP
