#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fairbatch/dataset.hpp"
#include "fairbatch/model.hpp"
#include "fairbatch/sampler.hpp"

namespace fairbatch {

enum class SamplerKind { fairbatch, uniform, cutting };

/// Everything a training run depends on. A config plus a seed fully
/// determines the run, including the emitted metrics bytes.
struct RunConfig {
  // data source: CSV when data_path is set, otherwise synthetic
  std::string data_path;
  std::string label_column = "y";
  std::string sensitive_column = "z";
  std::size_t synthetic_n = 3000;

  FairnessCriterion criterion;
  SamplerKind sampler = SamplerKind::fairbatch;
  double alpha = 0.005;
  std::size_t batch_size = 100;
  std::size_t epochs = 400;
  std::uint64_t seed = 1;
  double split_fraction = 2.0 / 3.0;

  // inner optimizer (Adam)
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  // lambda update cadence: 0 = once per epoch, k > 0 = every k batches
  std::size_t lambda_every = 0;
  BatchComposition composition = BatchComposition::iid;

  // optional within-group loss-rank reweighting
  bool loss_weighted = false;
  double temperature = 1.0;

  void validate() const;
};

/// Per-epoch training record. Test-side metrics are NaN (serialized as
/// null) when the test split is empty or a disparity's group precondition
/// fails; everything else is always present.
struct EpochRecord {
  std::size_t epoch = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double eo = 0.0;
  double ed = 0.0;
  double dp = 0.0;
  std::vector<double> lambda;
  std::vector<std::vector<double>> cell_losses;  // train BCE means, [y][z]
  double dp_objective = 0.0;  // A.1 objective on the train 0/1 loss table
};

struct TrainResult {
  std::vector<EpochRecord> records;
  ModelParams model;
};

/// Runs the bilevel training loop: uniform initialization, minibatch Adam
/// as the inner optimizer, and (for the fairbatch sampler) a signed lambda
/// step from full-train-set group losses at the configured cadence.
TrainResult run_train(const RunConfig& cfg);

std::string record_to_json_line(const EpochRecord& r);
EpochRecord record_from_json_line(const std::string& line);

/// Newline-delimited JSON, one record per line.
void write_metrics_ndjson(const std::vector<EpochRecord>& records,
                          const std::string& path);
std::string metrics_to_ndjson(const std::vector<EpochRecord>& records);

}  // namespace fairbatch
