#ifndef MTKD_TOY_MODEL_HPP
#define MTKD_TOY_MODEL_HPP

// Desk-scale stand-in for a distillation experiment: Gaussian-cluster data,
// a tanh trunk shared by several linear heads, plain SGD on the losses from
// losses.hpp, and the lambda-sweep harness.
//
// Head 0 is always the supervised ("sl") head and is the one evaluated.
// Further heads are auxiliary distillation heads, used only in training.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mtkd/calibration.hpp"
#include "mtkd/distill_targets.hpp"
#include "mtkd/error.hpp"
#include "mtkd/losses.hpp"
#include "mtkd/prob_core.hpp"

namespace mtkd {

/// mt19937_64 with hand-rolled real conversions so draws are identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticTask {
  std::size_t num_classes = 10;
  std::size_t input_dim = 16;
  std::vector<std::vector<double>> cluster_means;
  double noise_sigma = 1.0;
  std::vector<std::size_t> coarse_map;  // fine class -> coarse class; empty if none

  std::size_t num_coarse() const {
    std::size_t k = 0;
    for (std::size_t c : coarse_map) k = std::max(k, c + 1);
    return k;
  }
};

/// Cluster means drawn from N(0, mean_scale^2) per coordinate; the coarse map
/// sends class c to c mod num_coarse.
inline SyntheticTask make_task(std::size_t num_classes, std::size_t input_dim, double noise_sigma,
                               std::size_t num_coarse, double mean_scale, std::uint64_t seed) {
  if (num_classes < 2 || input_dim < 1) throw InvalidParameter("task needs K >= 2 and d >= 1");
  if (noise_sigma < 0.0) throw InvalidParameter("noise sigma must be non-negative");
  if (num_coarse > num_classes) throw InvalidParameter("more coarse than fine classes");
  SyntheticTask task;
  task.num_classes = num_classes;
  task.input_dim = input_dim;
  task.noise_sigma = noise_sigma;
  Rng rng(seed);
  task.cluster_means.assign(num_classes, std::vector<double>(input_dim));
  for (auto& mean : task.cluster_means) {
    for (double& v : mean) v = mean_scale * rng.normal();
  }
  if (num_coarse >= 2) {
    task.coarse_map.resize(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) task.coarse_map[c] = c % num_coarse;
  }
  return task;
}

struct Sample {
  std::vector<double> x;
  std::size_t label = 0;
};

using Dataset = std::vector<Sample>;

/// Labels cycle 0..K-1; features are the class mean plus N(0, sigma^2) noise.
inline Dataset generate_data(const SyntheticTask& task, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidParameter("dataset size must be >= 1");
  Rng rng(seed);
  Dataset data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i].label = i % task.num_classes;
    const auto& mean = task.cluster_means[data[i].label];
    data[i].x.resize(task.input_dim);
    for (std::size_t j = 0; j < task.input_dim; ++j) {
      data[i].x[j] = mean[j] + task.noise_sigma * rng.normal();
    }
  }
  return data;
}

inline Dataset coarsen(const Dataset& data, const SyntheticTask& task) {
  if (task.coarse_map.empty()) throw ConfigError("task has no coarse map");
  Dataset out = data;
  for (auto& s : out) s.label = task.coarse_map[s.label];
  return out;
}

// ---------------------------------------------------------------------------
// Network

struct AffineLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // out x in, row-major
  std::vector<double> bias;    // out

  AffineLayer() = default;
  AffineLayer(std::size_t in_dim, std::size_t out_dim)
      : in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0), bias(out_dim, 0.0) {}

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> y(bias);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = weight.data() + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] += acc;
    }
    return y;
  }
};

struct HeadSpec {
  std::string name;
  std::size_t num_classes = 0;
};

struct Head {
  std::string name;
  AffineLayer layer;
};

class ToyNetwork {
 public:
  ToyNetwork() = default;

  /// Weights and biases of every layer drawn uniformly from
  /// [-1/sqrt(fan_in), 1/sqrt(fan_in)]: trunk first, then heads in order.
  ToyNetwork(std::size_t input_dim, std::size_t hidden, const std::vector<HeadSpec>& heads,
             std::uint64_t seed)
      : trunk_(input_dim, hidden), seed_(seed) {
    if (input_dim < 1 || hidden < 1) throw InvalidParameter("network dimensions must be >= 1");
    if (heads.empty()) throw InvalidParameter("network needs at least one head");
    std::set<std::string> names;
    for (const auto& h : heads) {
      if (!names.insert(h.name).second) throw InvalidParameter("duplicate head '" + h.name + "'");
      if (h.num_classes < 2) throw InvalidParameter("head '" + h.name + "' needs >= 2 classes");
      heads_.push_back({h.name, AffineLayer(hidden, h.num_classes)});
    }
    Rng rng(seed);
    init_layer(trunk_, rng);
    for (auto& h : heads_) init_layer(h.layer, rng);
  }

  std::size_t input_dim() const noexcept { return trunk_.in; }
  std::size_t hidden_dim() const noexcept { return trunk_.out; }
  std::uint64_t seed() const noexcept { return seed_; }
  const AffineLayer& trunk() const noexcept { return trunk_; }
  AffineLayer& trunk() noexcept { return trunk_; }
  const std::vector<Head>& heads() const noexcept { return heads_; }
  std::vector<Head>& heads() noexcept { return heads_; }

  std::optional<std::size_t> head_index(const std::string& name) const {
    for (std::size_t i = 0; i < heads_.size(); ++i) {
      if (heads_[i].name == name) return i;
    }
    return std::nullopt;
  }

  /// Parameter arrays in a fixed order: trunk weight, trunk bias, then
  /// weight and bias of each head.
  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> blocks{trunk_.weight, trunk_.bias};
    for (auto& h : heads_) {
      blocks.emplace_back(h.layer.weight);
      blocks.emplace_back(h.layer.bias);
    }
    return blocks;
  }

  std::size_t parameter_count() const {
    std::size_t n = trunk_.weight.size() + trunk_.bias.size();
    for (const auto& h : heads_) n += h.layer.weight.size() + h.layer.bias.size();
    return n;
  }

  std::vector<double> flat_parameters() {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (auto block : parameter_blocks()) flat.insert(flat.end(), block.begin(), block.end());
    return flat;
  }

  void set_flat_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw InvalidInput("parameter count mismatch");
    std::size_t pos = 0;
    for (auto block : parameter_blocks()) {
      for (double& v : block) v = flat[pos++];
    }
  }

 private:
  static void init_layer(AffineLayer& layer, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.weight) w = rng.uniform(-s, s);
    for (double& b : layer.bias) b = rng.uniform(-s, s);
  }

  AffineLayer trunk_;
  std::vector<Head> heads_;
  std::uint64_t seed_ = 0;
};

struct ForwardPass {
  std::vector<double> hidden;
  std::vector<LogitVector> logits;  // one per head
};

inline ForwardPass forward_pass(const ToyNetwork& net, std::span<const double> input) {
  if (input.size() != net.input_dim()) {
    throw InvalidInput("input has dimension " + std::to_string(input.size()) + ", network expects " +
                       std::to_string(net.input_dim()));
  }
  ForwardPass pass;
  pass.hidden = net.trunk().apply(input);
  for (double& h : pass.hidden) h = std::tanh(h);
  pass.logits.reserve(net.heads().size());
  for (const auto& head : net.heads()) pass.logits.emplace_back(head.layer.apply(pass.hidden));
  return pass;
}

inline std::vector<LogitVector> forward(const ToyNetwork& net, std::span<const double> input) {
  return forward_pass(net, input).logits;
}

/// Gradient with the same block layout as ToyNetwork::parameter_blocks().
struct NetworkGradient {
  std::vector<std::vector<double>> blocks;

  explicit NetworkGradient(ToyNetwork& net) {
    for (auto b : net.parameter_blocks()) blocks.emplace_back(b.size(), 0.0);
  }

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

/// Accumulates scale * dLoss/dParams given dLoss/dLogits per head. An empty
/// head gradient means the head does not take part in the loss.
inline void backward(const ToyNetwork& net, std::span<const double> input, const ForwardPass& pass,
                     const std::vector<std::vector<double>>& head_grads, double scale,
                     NetworkGradient& grad) {
  const std::size_t hidden = net.hidden_dim();
  std::vector<double> d_hidden(hidden, 0.0);
  for (std::size_t h = 0; h < net.heads().size(); ++h) {
    const auto& g = head_grads[h];
    if (g.empty()) continue;
    const AffineLayer& layer = net.heads()[h].layer;
    auto& dw = grad.blocks[2 + 2 * h];
    auto& db = grad.blocks[3 + 2 * h];
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double go = g[o];
      db[o] += scale * go;
      const double* row = layer.weight.data() + o * hidden;
      double* drow = dw.data() + o * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        drow[j] += scale * go * pass.hidden[j];
        d_hidden[j] += go * row[j];
      }
    }
  }
  auto& dw = grad.blocks[0];
  auto& db = grad.blocks[1];
  const std::size_t in = net.input_dim();
  for (std::size_t j = 0; j < hidden; ++j) {
    const double da = d_hidden[j] * (1.0 - pass.hidden[j] * pass.hidden[j]);
    db[j] += scale * da;
    double* drow = dw.data() + j * in;
    for (std::size_t i = 0; i < in; ++i) drow[i] += scale * da * input[i];
  }
}

// ---------------------------------------------------------------------------
// Training

namespace method {
struct Baseline {};
struct LabelSmooth {
  double epsilon = 0.1;
};
struct Lst {
  double lambda = 0.5;
  double temperature = 5.0;
};
struct Multitask {
  double lambda = 0.5;
  double temperature = 1.0;
};
}  // namespace method

using Method = std::variant<method::Baseline, method::LabelSmooth, method::Lst, method::Multitask>;

inline std::string method_name(const Method& m) {
  static const char* const names[] = {"baseline", "label_smooth", "lst", "multitask"};
  return names[m.index()];
}

struct TrainConfig {
  Method method = method::Baseline{};
  std::size_t epochs = 30;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || !(learning_rate > 0.0)) {
      throw ConfigError("epochs, batch size and learning rate must be positive");
    }
  }
};

/// Teacher logits for every training sample, aimed at the network head named
/// `head`. Lst uses the first entry as its (same-unit) teacher.
struct TeacherLogits {
  std::string head;
  std::vector<LogitVector> per_sample;
};

struct SampleLoss {
  double value = 0.0;
  std::vector<std::vector<double>> head_grads;  // dLoss/dLogits per head, empty if unused
};

namespace detail {

inline void check_teachers(const ToyNetwork& net, const Dataset& data, const Method& m,
                           std::span<const TeacherLogits> teachers) {
  const bool needs = std::holds_alternative<method::Lst>(m) ||
                     std::holds_alternative<method::Multitask>(m);
  if (!needs) return;
  if (teachers.empty()) {
    throw ConfigError("method " + method_name(m) + " requires teacher soft labels");
  }
  for (const auto& t : teachers) {
    if (t.per_sample.size() != data.size()) {
      throw ConfigError("teacher '" + t.head + "' has " + std::to_string(t.per_sample.size()) +
                        " outputs for " + std::to_string(data.size()) + " samples");
    }
  }
  if (std::holds_alternative<method::Lst>(m)) {
    if (teachers.front().per_sample.front().size() != net.heads().front().layer.out) {
      throw ConfigError("lst teacher must share the supervised head's classes");
    }
    return;
  }
  for (const auto& t : teachers) {
    const auto idx = net.head_index(t.head);
    if (!idx || *idx == 0) throw ConfigError("no distillation head named '" + t.head + "'");
    if (t.per_sample.front().size() != net.heads()[*idx].layer.out) {
      throw ConfigError("teacher '" + t.head + "' class count differs from its head");
    }
  }
}

}  // namespace detail

/// Loss and head gradients for one sample under the given method.
inline SampleLoss sample_loss(const ToyNetwork& net, const ForwardPass& pass, const Sample& s,
                              std::size_t sample_index, const Method& m,
                              std::span<const TeacherLogits> teachers) {
  SampleLoss out;
  out.head_grads.resize(net.heads().size());
  const LogitVector& sl = pass.logits.front();
  const HardLabel hard(s.label, sl.size());
  LossResult single;
  if (std::holds_alternative<method::Baseline>(m)) {
    single = cross_entropy(sl, one_hot(hard));
  } else if (const auto* ls = std::get_if<method::LabelSmooth>(&m)) {
    single = cross_entropy(sl, smooth_label(hard, SmoothingConfig(ls->epsilon)));
  } else if (const auto* lst = std::get_if<method::Lst>(&m)) {
    single = lst_loss(sl, hard, teachers.front().per_sample[sample_index],
                      InterpolationConfig(lst->lambda, lst->temperature));
  } else {
    const auto& mt = std::get<method::Multitask>(m);
    MultiTaskLogits logits{sl, {}};
    std::vector<TeacherTarget> targets;
    std::vector<std::size_t> head_of;
    for (const auto& t : teachers) {
      const std::size_t idx = *net.head_index(t.head);
      logits.kd_logits.push_back({t.head, pass.logits[idx]});
      targets.push_back({t.head, t.per_sample[sample_index], mt.temperature});
      head_of.push_back(idx);
    }
    MultiTaskLossResult r = multitask_loss(logits, hard, targets, mt.lambda);
    out.value = r.value;
    out.head_grads[0] = std::move(r.sl_grad);
    for (std::size_t k = 0; k < head_of.size(); ++k) {
      out.head_grads[head_of[k]] = std::move(r.kd_grads[k]);
    }
    return out;
  }
  out.value = single.value;
  out.head_grads[0] = std::move(single.grad);
  return out;
}

/// Mean loss over the dataset and its gradient w.r.t. all parameters.
inline std::pair<double, NetworkGradient> dataset_loss(ToyNetwork& net, const Dataset& data,
                                                       std::span<const std::size_t> indices,
                                                       const Method& m,
                                                       std::span<const TeacherLogits> teachers) {
  NetworkGradient grad(net);
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(indices.size());
  for (std::size_t i : indices) {
    const ForwardPass pass = forward_pass(net, data[i].x);
    const SampleLoss l = sample_loss(net, pass, data[i], i, m, teachers);
    total += l.value;
    backward(net, data[i].x, pass, l.head_grads, scale, grad);
  }
  return {total * scale, std::move(grad)};
}

inline double mean_loss(const ToyNetwork& net, const Dataset& data, const Method& m,
                        std::span<const TeacherLogits> teachers) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += sample_loss(net, forward_pass(net, data[i].x), data[i], i, m, teachers).value;
  }
  return total / static_cast<double>(data.size());
}

struct TrainResult {
  ToyNetwork net;
  std::vector<double> loss_curve;  // mean training loss after each epoch
};

/// Mini-batch SGD. Sample order is reshuffled every epoch from cfg.seed.
inline TrainResult train(ToyNetwork net, const Dataset& data,
                         std::span<const TeacherLogits> teachers, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("empty training set");
  detail::check_teachers(net, data, cfg.method, teachers);

  Rng rng(cfg.seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::span<const std::size_t> batch(
          order.data() + start, std::min(cfg.batch_size, order.size() - start));
      auto [loss, grad] = dataset_loss(net, data, batch, cfg.method, teachers);
      auto blocks = net.parameter_blocks();
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t j = 0; j < blocks[b].size(); ++j) {
          blocks[b][j] -= cfg.learning_rate * grad.blocks[b][j];
        }
      }
    }
    result.loss_curve.push_back(mean_loss(net, data, cfg.method, teachers));
  }
  result.net = std::move(net);
  return result;
}

struct EvalResult {
  double accuracy = 0.0;
  std::vector<ReliabilityReport> reports;  // one per requested rank
};

inline std::vector<PredictionRecord> predict(const ToyNetwork& net, const Dataset& data) {
  std::vector<PredictionRecord> records;
  records.reserve(data.size());
  for (const auto& s : data) {
    records.emplace_back(softmax(forward_pass(net, s.x).logits.front()), s.label);
  }
  return records;
}

/// Accuracy and reliability reports of the supervised head at t = 1.
inline EvalResult evaluate(const ToyNetwork& net, const Dataset& data,
                           const std::vector<std::size_t>& ranks = {1, 2, 3},
                           std::size_t bins = 15) {
  const auto records = predict(net, data);
  EvalResult r;
  std::size_t correct = 0;
  for (const auto& rec : records) correct += top_n(rec.probs, 1).index == rec.true_label ? 1 : 0;
  r.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  for (std::size_t rank : ranks) r.reports.push_back(ece(records, rank, bins));
  return r;
}

// ---------------------------------------------------------------------------
// Experiment harness

struct ExperimentConfig {
  std::size_t num_classes = 10;
  std::size_t input_dim = 16;
  std::size_t hidden = 32;
  std::size_t num_coarse = 3;
  double noise_sigma = 1.5;
  double mean_scale = 1.0;
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;

  std::size_t teacher_width_factor = 4;
  std::size_t teacher_data_factor = 10;
  std::size_t teacher_epochs = 10;
  std::vector<std::string> teachers{"fine"};  // subset of {fine, coarse}, multitask only

  double lst_temperature = 5.0;
  double multitask_temperature = 1.0;

  TrainConfig train;  // method, epochs, learning rate, batch size (seed set per run)
};

/// Data and teacher outputs shared by every run with the same seed.
struct ExperimentWorld {
  SyntheticTask task;
  Dataset train;
  Dataset test;
  TeacherLogits fine_teacher;    // head "kd_fine"
  TeacherLogits coarse_teacher;  // head "kd_coarse"; empty without a coarse map
};

namespace detail {

inline TeacherLogits teacher_outputs(const ExperimentConfig& cfg, const Dataset& teacher_data,
                                     const Dataset& student_data, std::size_t classes,
                                     std::uint64_t seed, std::string head) {
  ToyNetwork net(cfg.input_dim, cfg.hidden * cfg.teacher_width_factor, {{"sl", classes}}, seed);
  TrainConfig tc = cfg.train;
  tc.method = method::Baseline{};
  tc.epochs = cfg.teacher_epochs;
  tc.seed = seed;
  const ToyNetwork trained = train(std::move(net), teacher_data, {}, tc).net;
  TeacherLogits out{std::move(head), {}};
  out.per_sample.reserve(student_data.size());
  for (const auto& s : student_data) out.per_sample.push_back(forward(trained, s.x).front());
  return out;
}

}  // namespace detail

inline ExperimentWorld build_world(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentWorld w;
  w.task = make_task(cfg.num_classes, cfg.input_dim, cfg.noise_sigma, cfg.num_coarse,
                     cfg.mean_scale, seed);
  w.train = generate_data(w.task, cfg.n_train, seed + 1);
  w.test = generate_data(w.task, cfg.n_test, seed + 2);
  const Dataset teacher_data =
      generate_data(w.task, cfg.n_train * cfg.teacher_data_factor, seed + 3);
  w.fine_teacher = detail::teacher_outputs(cfg, teacher_data, w.train, cfg.num_classes, seed + 4,
                                           "kd_fine");
  if (!w.task.coarse_map.empty()) {
    w.coarse_teacher =
        detail::teacher_outputs(cfg, coarsen(teacher_data, w.task), w.train,
                                w.task.num_coarse(), seed + 5, "kd_coarse");
  }
  return w;
}

/// Student network and teacher signals for one method. Multitask students
/// get one distillation head per configured teacher after the "sl" head.
inline std::pair<ToyNetwork, std::vector<TeacherLogits>> make_student(
    const ExperimentConfig& cfg, const ExperimentWorld& world, const Method& m,
    std::uint64_t seed) {
  std::vector<HeadSpec> heads{{"sl", cfg.num_classes}};
  std::vector<TeacherLogits> teachers;
  if (std::holds_alternative<method::Lst>(m)) {
    teachers.push_back(world.fine_teacher);
  } else if (std::holds_alternative<method::Multitask>(m)) {
    for (const auto& name : cfg.teachers) {
      if (name == "fine") {
        heads.push_back({"kd_fine", cfg.num_classes});
        teachers.push_back(world.fine_teacher);
      } else if (name == "coarse") {
        if (world.coarse_teacher.per_sample.empty()) {
          throw ConfigError("coarse teacher requested but num_coarse < 2");
        }
        heads.push_back({"kd_coarse", world.task.num_coarse()});
        teachers.push_back(world.coarse_teacher);
      } else {
        throw ConfigError("unknown teacher '" + name + "' (expected fine or coarse)");
      }
    }
  }
  return {ToyNetwork(cfg.input_dim, cfg.hidden, heads, seed), std::move(teachers)};
}

struct RunResult {
  ToyNetwork net;
  std::vector<double> loss_curve;
  EvalResult eval;
};

inline RunResult run_experiment(const ExperimentConfig& cfg, const ExperimentWorld& world,
                                const Method& m, std::uint64_t seed) {
  auto [net, teachers] = make_student(cfg, world, m, seed);
  TrainConfig tc = cfg.train;
  tc.method = m;
  tc.seed = seed;
  TrainResult tr = train(std::move(net), world.train, teachers, tc);
  EvalResult ev = evaluate(tr.net, world.test);
  return {std::move(tr.net), std::move(tr.loss_curve), std::move(ev)};
}

struct SweepRow {
  std::string method;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  double ece1 = 0.0;
  double ece2 = 0.0;
  double ece3 = 0.0;
};

/// One row per (method, lambda, seed), in that nesting order. Lst runs at
/// cfg.lst_temperature, multitask at cfg.multitask_temperature.
inline std::vector<SweepRow> sweep_lambda(const ExperimentConfig& cfg,
                                          const std::vector<double>& lambdas,
                                          const std::vector<std::string>& methods,
                                          const std::vector<std::uint64_t>& seeds) {
  if (lambdas.empty() || methods.empty() || seeds.empty()) {
    throw InvalidInput("sweep needs at least one lambda, method and seed");
  }
  for (const auto& m : methods) {
    if (m != "lst" && m != "multitask") {
      throw InvalidInput("sweep method must be lst or multitask, got '" + m + "'");
    }
  }
  std::map<std::uint64_t, ExperimentWorld> worlds;
  for (std::uint64_t s : seeds) {
    if (!worlds.contains(s)) worlds.emplace(s, build_world(cfg, s));
  }
  std::vector<SweepRow> rows;
  for (const auto& name : methods) {
    for (double lambda : lambdas) {
      for (std::uint64_t s : seeds) {
        const Method m = name == "lst"
                             ? Method(method::Lst{lambda, cfg.lst_temperature})
                             : Method(method::Multitask{lambda, cfg.multitask_temperature});
        const RunResult run = run_experiment(cfg, worlds.at(s), m, s);
        rows.push_back({name, lambda, s, run.eval.accuracy, run.eval.reports[0].ece,
                        run.eval.reports[1].ece, run.eval.reports[2].ece});
      }
    }
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "method,lambda,seed,acc,ece1,ece2,ece3\n";
  for (const auto& r : rows) {
    out += r.method + ',' + format_fixed(r.lambda) + ',' + std::to_string(r.seed) + ',' +
           format_fixed(r.accuracy) + ',' + format_fixed(r.ece1) + ',' + format_fixed(r.ece2) +
           ',' + format_fixed(r.ece3) + '\n';
  }
  return out;
}

}  // namespace mtkd

#endif  // MTKD_TOY_MODEL_HPP
