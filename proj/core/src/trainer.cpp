#include "fairbatch/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "fairbatch/metrics.hpp"

namespace fairbatch {

void RunConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw std::invalid_argument("config: alpha must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction <= 1.0))
    throw std::invalid_argument("config: split fraction must be in (0, 1]");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (criterion.threshold < 0.0)
    throw std::invalid_argument("config: threshold must be >= 0");
  if (temperature < 0.0)
    throw std::invalid_argument("config: temperature must be >= 0");
  if (data_path.empty() && synthetic_n == 0)
    throw std::invalid_argument("config: need a data path or a synthetic size");
}

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::vector<double> per_example_bce(const ModelParams& p, const Dataset& d) {
  std::vector<double> losses(d.size());
  const LossSpec bce{LossKind::binary_cross_entropy};
  for (std::size_t i = 0; i < d.size(); ++i)
    losses[i] = example_loss(p, d.row(i), d.labels[i], bce);
  return losses;
}

}  // namespace

TrainResult run_train(const RunConfig& cfg) {
  cfg.validate();

  const Dataset full = cfg.data_path.empty()
                           ? gen_synthetic(cfg.synthetic_n, cfg.seed)
                           : load_csv(cfg.data_path, cfg.label_column,
                                      cfg.sensitive_column);
  auto [train, test] = split(full, SplitSpec{cfg.split_fraction, cfg.seed});
  if (cfg.sampler == SamplerKind::cutting) train = cutting(train, cfg.seed);
  if (train.size() == 0) throw std::invalid_argument("run_train: empty train split");

  const GroupIndex gi = build_group_index(train);
  const GroupIndex gi_test = build_group_index(test);

  ModelParams params = ModelParams::zeros(train.k, train.n_y);
  AdamState adam = AdamState::init(params, cfg.lr);
  adam.beta1 = cfg.beta1;
  adam.beta2 = cfg.beta2;
  adam.eps = cfg.adam_eps;

  const bool adaptive = cfg.sampler == SamplerKind::fairbatch;
  std::optional<LambdaState> ls;
  SamplingDistribution sd;
  if (adaptive) {
    ls = init_lambda(cfg.criterion, gi, cfg.alpha);
    sd = sampling_distribution(*ls, cfg.criterion, gi);
  } else {
    sd = uniform_distribution(gi);
    // constant lambda is still logged so every record carries the
    // criterion's full vector
    try {
      ls = init_lambda(cfg.criterion, gi, cfg.alpha);
    } catch (const std::invalid_argument&) {
      ls.reset();
    }
  }

  Rng batch_rng(cfg.seed, rng_stream::batches);
  const std::size_t batches_per_epoch =
      (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const LossSpec bce{LossKind::binary_cross_entropy};
  const LossSpec zero_one{LossKind::zero_one};

  const auto refresh_distribution = [&]() {
    const GroupLossTable table =
        cfg.criterion.kind == Fairness::dp
            ? dp_update_losses(params, train, gi)
            : group_losses(params, train, gi, bce);
    *ls = update_lambda(*ls, cfg.criterion, table);
    sd = sampling_distribution(*ls, cfg.criterion, gi);
    if (cfg.loss_weighted)
      sd = loss_weighted_within_group(sd, per_example_bce(params, train),
                                      cfg.temperature);
  };

  TrainResult result;
  result.records.reserve(cfg.epochs);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.lambda_every == 0 || !adaptive) {
      const BatchPlan plan = draw_epoch(sd, cfg.batch_size, batches_per_epoch,
                                        batch_rng, cfg.composition);
      for (const auto& batch : plan.batches) {
        const Gradient g = batch_gradient(params, batch, train);
        std::tie(params, adam) = adam_step(params, adam, g);
      }
      if (adaptive) refresh_distribution();
    } else {
      for (std::size_t b = 0; b < batches_per_epoch; ++b) {
        const BatchPlan plan =
            draw_epoch(sd, cfg.batch_size, 1, batch_rng, cfg.composition);
        const Gradient g = batch_gradient(params, plan.batches[0], train);
        std::tie(params, adam) = adam_step(params, adam, g);
        if ((b + 1) % cfg.lambda_every == 0) refresh_distribution();
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_accuracy = accuracy(params, train);
    rec.test_accuracy = kNan;
    rec.eo = rec.ed = rec.dp = kNan;
    if (test.size() > 0) {
      rec.test_accuracy = accuracy(params, test);
      try {
        rec.eo = eo_disparity(params, test, gi_test);
      } catch (const std::invalid_argument&) {}
      try {
        rec.ed = ed_disparity(params, test, gi_test);
      } catch (const std::invalid_argument&) {}
      try {
        rec.dp = dp_disparity(params, test, gi_test);
      } catch (const std::invalid_argument&) {}
    }
    if (ls) rec.lambda = ls->lambda;

    const GroupLossTable train_bce = group_losses(params, train, gi, bce);
    rec.cell_losses.assign(gi.n_y, std::vector<double>(gi.n_z, 0.0));
    for (int y = 0; y < gi.n_y; ++y)
      for (int z = 0; z < gi.n_z; ++z)
        rec.cell_losses[y][z] = train_bce.at(y, z);

    rec.dp_objective = kNan;
    if (gi.n_y == 2 && gi.n_z == 2) {
      const GroupLossTable train01 = group_losses(params, train, gi, zero_one);
      rec.dp_objective = dp_sufficient_objective(train01);
    }

    result.records.push_back(std::move(rec));
  }

  result.model = std::move(params);
  return result;
}

namespace {

nlohmann::json to_json_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double from_json_or_nan(const nlohmann::json& j) {
  return j.is_null() ? kNan : j.get<double>();
}

}  // namespace

std::string record_to_json_line(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = to_json_or_null(r.test_accuracy);
  j["eo"] = to_json_or_null(r.eo);
  j["ed"] = to_json_or_null(r.ed);
  j["dp"] = to_json_or_null(r.dp);
  j["lambda"] = r.lambda;
  j["cell_losses"] = r.cell_losses;
  j["dp_objective"] = to_json_or_null(r.dp_objective);
  return j.dump();
}

EpochRecord record_from_json_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_accuracy = j.at("train_accuracy").get<double>();
  r.test_accuracy = from_json_or_nan(j.at("test_accuracy"));
  r.eo = from_json_or_nan(j.at("eo"));
  r.ed = from_json_or_nan(j.at("ed"));
  r.dp = from_json_or_nan(j.at("dp"));
  r.lambda = j.at("lambda").get<std::vector<double>>();
  r.cell_losses = j.at("cell_losses").get<std::vector<std::vector<double>>>();
  r.dp_objective = from_json_or_nan(j.at("dp_objective"));
  return r;
}

std::string metrics_to_ndjson(const std::vector<EpochRecord>& records) {
  std::string out;
  for (const EpochRecord& r : records) {
    out += record_to_json_line(r);
    out += '\n';
  }
  return out;
}

void write_metrics_ndjson(const std::vector<EpochRecord>& records,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("metrics: cannot open '" + path + "'");
  out << metrics_to_ndjson(records);
  if (!out) throw std::runtime_error("metrics: write to '" + path + "' failed");
}

}  // namespace fairbatch
