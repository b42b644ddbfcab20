#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpsmp/data.hpp"
#include "hpsmp/model.hpp"
#include "hpsmp/text.hpp"

namespace hpsmp {

struct TrainConfig {
  ModelConfig model;
  double lr = 0.001;
  int batch_size = 64;
  int epochs = 15;
  std::uint64_t seed = 0;
  int horizon = 5;  // labeling horizon, echoed into reports

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  /// NaN when the validation split is empty.
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> curves;
  /// True when a non-finite loss aborted training; `model` is then the last
  /// epoch-end snapshot that was still finite.
  bool aborted_non_finite = false;
  int completed_epochs = 0;
};

/// Adam over per-day BCE. Epoch-level shuffling and dropout draw from the
/// "shuffle" / "dropout" sub-streams of config.seed, so the whole run is
/// reproducible bit-for-bit. The price normalizer is fitted on the train
/// split.
TrainResult train(const LabeledDataset& dataset, EmbeddingTable embedding,
                  const TrainConfig& config);

/// Confusion counts and the three headline metrics. A zero denominator makes
/// the metric undefined (nullopt), never silently 0.
struct EvalReport {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::vector<std::pair<Date, double>> predictions;
};

/// Computes the metric triplet from raw counts (shared with property tests).
void fill_metrics(EvalReport& report);

/// Scores every labeled day in `indices` at threshold 0.5 (ties go to class 1).
EvalReport evaluate(Model& model, const std::vector<DayRecord>& days,
                    const std::vector<std::size_t>& indices);

/// One deterministic inference pass for a single day.
double predict(Model& model, const DayRecord& day);

/// `epoch,train_loss,train_acc,val_loss,val_acc` rows.
void write_curves_csv(const std::string& path, const std::vector<EpochStats>& curves);

/// Confusion counts + metrics + config echo + seed.
void write_report_json(const std::string& path, const EvalReport& report,
                       const TrainConfig& config);

}  // namespace hpsmp
