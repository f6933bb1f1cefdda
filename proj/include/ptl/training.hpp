#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptl/checkpoint.hpp"
#include "ptl/dataset.hpp"
#include "ptl/model.hpp"
#include "ptl/tape.hpp"
#include "ptl/tensor.hpp"

namespace ptl {

/// Mean over the batch of -log softmax(logits)[label], via max-shifted log-sum-exp.
/// logits: B×K (or [K] with one label).
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const std::uint32_t> labels);

// ---- Adam ------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::uint64_t t = 0;

  static AdamState zeros(std::span<const Tensor> params);
};

/// One bias-corrected Adam update of every tensor in `params`, in place.
/// grads[i] matches params[i] element for element.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& config);

// ---- metrics ---------------------------------------------------------------------

struct MetricsReport {
  std::size_t num_classes = 0;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;  ///< percent
  double macro_f1 = 0.0;  ///< percent
  std::vector<double> precision, recall, f1;  ///< fractions per class
  std::vector<std::size_t> support;
  /// confusion[label][prediction]
  std::vector<std::vector<std::size_t>> confusion;
};

/// Zero-support classes count as F1 = 0 in the macro average, as do classes
/// never predicted (precision 0).
MetricsReport compute_metrics(std::span<const std::uint32_t> preds,
                              std::span<const std::uint32_t> labels, std::size_t num_classes);

std::vector<std::uint32_t> argmax_rows(const Tensor& logits);

// ---- history ---------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double eval_acc = 0.0;
  double macro_f1 = 0.0;
  double seconds = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunHistory {
  std::vector<EpochRecord> records;

  /// `epoch,train_loss,train_acc,eval_acc,macro_f1,seconds`, 9 significant digits.
  std::string to_csv() const;
  static RunHistory from_csv(std::string_view text);
  void write_csv(const std::filesystem::path& path) const;
  static RunHistory read_csv(const std::filesystem::path& path);
  /// Epochs strictly increasing, metrics finite and in range.
  void validate() const;
};

// ---- training --------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::size_t points = 256;
  AdamConfig adam;
  std::uint64_t seed = 0;
  bool freeze_backbone = false;
  /// Evaluate every `eval_every` epochs; the last epoch is always evaluated.
  /// Rows for skipped epochs repeat the previous eval metrics.
  std::size_t eval_every = 1;
  /// Random FPS starts during training; evaluation always uses the canonical start.
  bool random_start = true;
  /// Off: the seconds column is written as 0 so histories reproduce bitwise.
  bool log_wall_time = false;

  /// Validates the ranges; `allow_zero_epochs` is for the fine-tune identity path.
  void validate(bool allow_zero_epochs = false) const;
};

struct TrainResult {
  ModelParams final_params;
  ModelParams best_params;
  std::size_t best_epoch = 0;  ///< 0 when no epoch ran
  double best_eval_acc = 0.0;
  RunHistory history;
};

/// Called after each epoch; returning false stops the run early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Shuffled minibatch Adam on cross-entropy starting from `start`. When
/// `eval` is null the training set is also the evaluation set. The best
/// model is the first epoch reaching the highest eval accuracy.
TrainResult run_training(ModelParams start, const Dataset& train, const Dataset* eval,
                         const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Fresh parameters from derive_seed(config.seed, ...), then run_training.
TrainResult train_loop(const ModelConfig& model, const Dataset& train, const Dataset* eval,
                       const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Copies the source backbone, reinitializes the head for train.num_classes(),
/// optionally freezes the backbone, then runs run_training.
TrainResult finetune(const Checkpoint& source, const Dataset& train, const Dataset* eval,
                     const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Logits of `dataset` in canonical-start evaluation mode, batch by batch.
MetricsReport evaluate(const ModelParams& params, const Dataset& dataset, std::size_t points,
                       std::size_t batch_size, std::vector<std::uint32_t>* predictions = nullptr);

// ---- run comparison ----------------------------------------------------------------

struct RunSummary {
  std::string method;
  std::size_t epochs = 0;
  double final_acc = 0.0;
  double final_f1 = 0.0;
  double best_acc = 0.0;
  std::size_t best_epoch = 0;
  /// First epoch with eval accuracy >= threshold.
  std::optional<std::size_t> epochs_to_threshold;
};

RunSummary summarize_run(const std::string& method, const RunHistory& history, double threshold);

/// Epochs-to-threshold of a history, or nullopt when never reached.
std::optional<std::size_t> epochs_to_threshold(const RunHistory& history, double threshold);

/// Markdown tables: the `Epochs | Method | Accuracy | F1 Score` table of
/// final eval metrics, then best accuracy and epochs-to-threshold per run.
std::string compare_runs(const std::vector<RunSummary>& runs, double threshold);

/// Percent value rounded to one decimal, without a trailing ".0".
std::string format_percent(double value);

}  // namespace ptl
