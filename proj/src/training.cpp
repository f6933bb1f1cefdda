#include "ptl/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "ptl/error.hpp"
#include "ptl/ops.hpp"
#include "ptl/random.hpp"

namespace ptl {

// ---- loss --------------------------------------------------------------------------

Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::uint32_t> labels) {
  if (logits.rank() != 1 && logits.rank() != 2) {
    throw ShapeError("cross_entropy: logits must be [K] or B×K, got " + shape_str(logits.shape()));
  }
  const std::size_t batch = logits.rank() == 2 ? logits.dim(0) : 1;
  const std::size_t k = logits.shape().back();
  if (labels.size() != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(batch) + " rows");
  }
  for (auto label : labels) {
    if (label >= k) {
      throw IndexError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                       std::to_string(k) + " classes");
    }
  }
  auto x = logits.data();
  std::vector<double> probs(x.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = x.data() + b * k;
    double m = row[0];
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
    const double lse = m + std::log(s);
    total += lse - row[labels[b]];
    for (std::size_t j = 0; j < k; ++j) probs[b * k + j] = std::exp(row[j] - lse);
  }
  const bool track = logits.requires_grad();
  Tensor result(Shape{}, {total / static_cast<double>(batch)}, track);
  if (track) {
    std::vector<std::uint32_t> lab(labels.begin(), labels.end());
    tape.record("cross_entropy", result,
                [logits, probs = std::move(probs), lab = std::move(lab), batch, k](
                    std::span<const double> g) {
                  Tensor t = logits;
                  auto gx = t.grad_buffer();
                  const double s = g[0] / static_cast<double>(batch);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t j = 0; j < k; ++j) {
                      const double onehot = j == lab[b] ? 1.0 : 0.0;
                      gx[b * k + j] += s * (probs[b * k + j] - onehot);
                    }
                  }
                });
  }
  return result;
}

// ---- Adam --------------------------------------------------------------------------

AdamState AdamState::zeros(std::span<const Tensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.numel(), 0.0);
    s.v.emplace_back(p.numel(), 0.0);
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("adam_step: params, grads and state disagree on tensor count");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    const auto& g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != p.size() || m.size() != p.size()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) + " has " +
                       std::to_string(g.size()) + " entries, parameter has " +
                       std::to_string(p.size()));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      p[j] -= config.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
    }
  }
}

// ---- metrics -------------------------------------------------------------------------

MetricsReport compute_metrics(std::span<const std::uint32_t> preds,
                              std::span<const std::uint32_t> labels, std::size_t num_classes) {
  if (preds.empty()) throw ConfigError("compute_metrics: no predictions");
  if (preds.size() != labels.size()) {
    throw ShapeError("compute_metrics: " + std::to_string(preds.size()) + " predictions vs " +
                     std::to_string(labels.size()) + " labels");
  }
  MetricsReport r;
  r.num_classes = num_classes;
  r.total = preds.size();
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] >= num_classes || labels[i] >= num_classes) {
      throw IndexError("compute_metrics: class index out of range at example " + std::to_string(i));
    }
    ++r.confusion[labels[i]][preds[i]];
  }
  std::vector<std::size_t> predicted(num_classes, 0);
  r.support.assign(num_classes, 0);
  for (std::size_t a = 0; a < num_classes; ++a) {
    for (std::size_t b = 0; b < num_classes; ++b) {
      r.support[a] += r.confusion[a][b];
      predicted[b] += r.confusion[a][b];
    }
    r.correct += r.confusion[a][a];
  }
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double tp = static_cast<double>(r.confusion[c][c]);
    const double p = predicted[c] ? tp / static_cast<double>(predicted[c]) : 0.0;
    const double q = r.support[c] ? tp / static_cast<double>(r.support[c]) : 0.0;
    const double f = p + q > 0.0 ? 2.0 * p * q / (p + q) : 0.0;
    r.precision.push_back(p);
    r.recall.push_back(q);
    r.f1.push_back(f);
    f1_sum += f;
  }
  r.accuracy = 100.0 * static_cast<double>(r.correct) / static_cast<double>(r.total);
  r.macro_f1 = 100.0 * f1_sum / static_cast<double>(num_classes);
  return r;
}

std::vector<std::uint32_t> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows: expected B×K, got " + shape_str(logits.shape()));
  const std::size_t k = logits.dim(1);
  auto d = logits.data();
  std::vector<std::uint32_t> out;
  for (std::size_t b = 0; b < logits.dim(0); ++b) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (d[b * k + j] > d[b * k + best]) best = j;
    }
    out.push_back(static_cast<std::uint32_t>(best));
  }
  return out;
}

// ---- history -------------------------------------------------------------------------

namespace {

constexpr std::string_view kHistoryHeader = "epoch,train_loss,train_acc,eval_acc,macro_f1,seconds";

double parse_field(const std::string& text, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) throw ParseError(line, "not a number: '" + text + "'");
  return v;
}

}  // namespace

std::string RunHistory::to_csv() const {
  std::string out(kHistoryHeader);
  out += '\n';
  for (const auto& r : records) {
    out += fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.epoch, r.train_loss,
                       r.train_acc, r.eval_acc, r.macro_f1, r.seconds);
  }
  return out;
}

RunHistory RunHistory::from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) {
    throw ParseError(1, "expected header '" + std::string(kHistoryHeader) + "'");
  }
  RunHistory h;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 6) {
      throw ParseError(line_no, "expected 6 fields, got " + std::to_string(fields.size()));
    }
    EpochRecord r;
    const double epoch = parse_field(fields[0], line_no);
    if (epoch < 0 || epoch != std::floor(epoch)) throw ParseError(line_no, "epoch must be a whole number");
    r.epoch = static_cast<std::size_t>(epoch);
    r.train_loss = parse_field(fields[1], line_no);
    r.train_acc = parse_field(fields[2], line_no);
    r.eval_acc = parse_field(fields[3], line_no);
    r.macro_f1 = parse_field(fields[4], line_no);
    r.seconds = parse_field(fields[5], line_no);
    h.records.push_back(r);
  }
  return h;
}

void RunHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << to_csv();
  if (!out) throw Error("write failed: " + path.string());
}

RunHistory RunHistory::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open history " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_csv(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

void RunHistory::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (i > 0 && r.epoch <= records[i - 1].epoch) {
      throw ConfigError("history: epochs not strictly increasing at row " + std::to_string(i + 1));
    }
    for (double v : {r.train_loss, r.train_acc, r.eval_acc, r.macro_f1, r.seconds}) {
      if (!std::isfinite(v)) throw NumericError("history: non-finite value at epoch " + std::to_string(r.epoch));
    }
    for (double v : {r.train_acc, r.eval_acc, r.macro_f1}) {
      if (v < 0.0 || v > 100.0) {
        throw ConfigError("history: percentage out of [0, 100] at epoch " + std::to_string(r.epoch));
      }
    }
  }
}

// ---- training ------------------------------------------------------------------------

void TrainConfig::validate(bool allow_zero_epochs) const {
  if (epochs == 0 && !allow_zero_epochs) throw ConfigError("train.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (points == 0) throw ConfigError("train.points must be >= 1");
  if (!(adam.lr > 0.0) || !std::isfinite(adam.lr)) throw ConfigError("train.lr must be > 0");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0)) throw ConfigError("train.beta1 must lie in (0, 1)");
  if (!(adam.beta2 > 0.0 && adam.beta2 < 1.0)) throw ConfigError("train.beta2 must lie in (0, 1)");
  if (!(adam.eps > 0.0)) throw ConfigError("train.eps must be > 0");
  if (eval_every == 0) throw ConfigError("train.eval_every must be >= 1");
}

namespace {

// Independent random streams under the run seed.
enum Stream : std::uint64_t { kInitStream = 1, kShuffleStream, kStartStream, kHeadStream };

void check_classes(const ModelParams& params, const Dataset& data, const char* role) {
  if (data.num_classes() != params.config.num_classes) {
    throw ShapeError(std::string(role) + " set has " + std::to_string(data.num_classes()) +
                     " classes, model has " + std::to_string(params.config.num_classes));
  }
}

ModelParams detached(const ModelParams& params) {
  ModelParams out = params.clone();
  for (const auto& [name, t] : out.tensors) {
    Tensor handle = t;
    handle.set_requires_grad(false);
  }
  return out;
}

}  // namespace

MetricsReport evaluate(const ModelParams& params, const Dataset& dataset, std::size_t points,
                       std::size_t batch_size, std::vector<std::uint32_t>* predictions) {
  check_classes(params, dataset, "evaluation");
  const ModelParams frozen = detached(params);
  BatchSpec spec{batch_size, 0, points, false};
  std::vector<std::uint32_t> preds, labels;
  for (const auto& batch : make_batches(dataset, spec, 0)) {
    Tape tape;
    const auto p = argmax_rows(forward_logits(tape, batch.positions, frozen, {}));
    preds.insert(preds.end(), p.begin(), p.end());
    labels.insert(labels.end(), batch.labels.begin(), batch.labels.end());
  }
  if (predictions) *predictions = preds;
  return compute_metrics(preds, labels, dataset.num_classes());
}

TrainResult run_training(ModelParams start, const Dataset& train, const Dataset* eval,
                         const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate(true);
  check_classes(start, train, "training");
  const Dataset& eval_set = eval ? *eval : train;
  check_classes(start, eval_set, "evaluation");

  TrainResult result;
  result.final_params = std::move(start);
  ModelParams& params = result.final_params;

  std::vector<std::string> names;
  std::vector<Tensor> trainable;
  for (const auto& [name, t] : params.tensors) {
    Tensor handle = t;
    const bool train_it = !(config.freeze_backbone && !is_head_param(name));
    handle.set_requires_grad(train_it);
    if (train_it) {
      names.push_back(name);
      trainable.push_back(handle);
    }
  }
  AdamState adam = AdamState::zeros(trainable);
  std::vector<std::vector<double>> grads(trainable.size());

  result.best_params = params.clone();
  const BatchSpec batch_spec{config.batch_size, derive_seed(config.seed, {kShuffleStream}),
                             config.points, true};
  EpochRecord last_eval;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = make_batches(train, batch_spec, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch& batch = batches[bi];
      ForwardOptions opt;
      if (config.random_start) {
        opt.start = StartPolicy::random;
        opt.seed = derive_seed(config.seed, {kStartStream, epoch, bi});
      }
      Tape tape;
      const Tensor logits = forward_logits(tape, batch.positions, params, opt);
      const Tensor loss = cross_entropy(tape, logits, batch.labels);
      if (!std::isfinite(loss.item())) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi));
      }
      for (auto& t : trainable) t.zero_grad();
      tape.backward(loss);
      for (std::size_t i = 0; i < trainable.size(); ++i) {
        if (trainable[i].has_grad()) {
          auto g = trainable[i].grad();
          grads[i].assign(g.begin(), g.end());
        } else {
          grads[i].assign(trainable[i].numel(), 0.0);
        }
        for (double v : grads[i]) {
          if (!std::isfinite(v)) {
            throw NumericError("non-finite gradient in '" + names[i] + "' at epoch " +
                               std::to_string(epoch));
          }
        }
      }
      adam_step(trainable, grads, adam, config.adam);
      for (std::size_t i = 0; i < trainable.size(); ++i) check_finite(trainable[i], names[i]);

      const auto preds = argmax_rows(logits);
      for (std::size_t j = 0; j < preds.size(); ++j) correct += preds[j] == batch.labels[j];
      loss_sum += loss.item() * static_cast<double>(preds.size());
      seen += preds.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_acc = 100.0 * static_cast<double>(correct) / static_cast<double>(seen);
    if (epoch % config.eval_every == 0 || epoch == config.epochs) {
      const MetricsReport report = evaluate(params, eval_set, config.points, config.batch_size);
      last_eval.eval_acc = report.accuracy;
      last_eval.macro_f1 = report.macro_f1;
      if (!have_best || report.accuracy > result.best_eval_acc) {
        have_best = true;
        result.best_eval_acc = report.accuracy;
        result.best_epoch = epoch;
        result.best_params = params.clone();
      }
    }
    rec.eval_acc = last_eval.eval_acc;
    rec.macro_f1 = last_eval.macro_f1;
    if (config.log_wall_time) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    result.history.records.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  for (const auto& [name, t] : result.final_params.tensors) {
    Tensor handle = t;
    handle.set_requires_grad(true);
  }
  return result;
}

TrainResult train_loop(const ModelConfig& model, const Dataset& train, const Dataset* eval,
                       const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  model.validate();
  if (model.num_classes != train.num_classes()) {
    throw ShapeError("model has " + std::to_string(model.num_classes) + " classes, training set has " +
                     std::to_string(train.num_classes()));
  }
  return run_training(init_params(model, derive_seed(config.seed, {kInitStream})), train, eval,
                      config, on_epoch);
}

TrainResult finetune(const Checkpoint& source, const Dataset& train, const Dataset* eval,
                     const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate(true);
  ModelParams start =
      reinit_head(source.params, train.num_classes(), derive_seed(config.seed, {kHeadStream}));
  return run_training(std::move(start), train, eval, config, on_epoch);
}

// ---- comparison ------------------------------------------------------------------------

std::optional<std::size_t> epochs_to_threshold(const RunHistory& history, double threshold) {
  for (const auto& r : history.records) {
    if (r.eval_acc >= threshold) return r.epoch;
  }
  return std::nullopt;
}

RunSummary summarize_run(const std::string& method, const RunHistory& history, double threshold) {
  if (history.records.empty()) throw ConfigError("summarize_run: empty history for " + method);
  RunSummary s;
  s.method = method;
  const auto& last = history.records.back();
  s.epochs = last.epoch;
  s.final_acc = last.eval_acc;
  s.final_f1 = last.macro_f1;
  for (const auto& r : history.records) {
    if (s.best_epoch == 0 || r.eval_acc > s.best_acc) {
      s.best_acc = r.eval_acc;
      s.best_epoch = r.epoch;
    }
  }
  s.epochs_to_threshold = epochs_to_threshold(history, threshold);
  return s;
}

std::string format_percent(double value) {
  std::string s = fmt::format("{:.1f}", value);
  if (s.ends_with(".0")) s.resize(s.size() - 2);
  if (s == "-0") s = "0";
  return s;
}

std::string compare_runs(const std::vector<RunSummary>& runs, double threshold) {
  std::string out = "| Epochs | Method | Accuracy | F1 Score |\n|---|---|---|---|\n";
  for (const auto& r : runs) {
    out += fmt::format("| {} | {} | {} | {} |\n", r.epochs, r.method, format_percent(r.final_acc),
                       format_percent(r.final_f1));
  }
  out += fmt::format("\n| Method | Best Accuracy | Best Epoch | Epochs to {}% |\n|---|---|---|---|\n",
                     format_percent(threshold));
  for (const auto& r : runs) {
    out += fmt::format("| {} | {} | {} | {} |\n", r.method, format_percent(r.best_acc), r.best_epoch,
                       r.epochs_to_threshold ? std::to_string(*r.epochs_to_threshold) : "never");
  }
  return out;
}

}  // namespace ptl
