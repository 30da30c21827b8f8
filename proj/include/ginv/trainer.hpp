#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ginv/ginvnet.hpp"
#include "ginv/tasks.hpp"

namespace ginv {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long step = 0;
};

/// One bias-corrected Adam update. Moments are created on the first call.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamOptions& options);

enum class ModelKind { GInv, GAvg, Mlp };

ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

struct TrainConfig {
  ModelKind model = ModelKind::GInv;
  /// Empty means the dataset's group.
  std::string group_spec;
  std::string task = "poly";
  double learning_rate = 1e-3;
  /// 0 trains on the full training split each step.
  int batch_size = 0;
  int max_epochs = 20000;
  /// Counted in validation evaluations, not epochs.
  int patience = 1000;
  int eval_every = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  GInvConfig ginv = GInvConfig::polynomial();
  GAvgConfig gavg = GAvgConfig::polynomial();

  static TrainConfig polynomial(ModelKind kind);
  static TrainConfig quadrangle(ModelKind kind);

  void validate() const;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double train_mae = 0.0;
  double val_mae = 0.0;
  double test_mae = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  long param_count = 0;
  bool diverged = false;
  /// (epoch, validation MAE) at every evaluation, starting with epoch 0.
  std::vector<std::pair<int, double>> val_history;

  friend bool operator==(const SeedResult&, const SeedResult&) = default;
};

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single value.
  double std = 0.0;

  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

MeanStd mean_std(std::span<const double> values);

struct TrainReport {
  std::string model;
  std::string group;
  std::string task;
  long param_count = 0;
  std::vector<SeedResult> seeds;
  /// Aggregates over the seeds that did not diverge.
  MeanStd train;
  MeanStd val;
  MeanStd test;

  std::size_t succeeded() const;
  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

struct TrainOutcome {
  TrainReport report;
  /// Best-validation model of the best seed.
  std::optional<Model> best_model;
};

/// Fresh model for the config, initialised from `seed`.
Model make_model(const TrainConfig& config, const Dataset& data, std::uint64_t seed);

/// Mean absolute error of the model on a (B*n, n_in) batch.
double evaluate(const Model& model, const Matrix& inputs, const Matrix& targets);
double evaluate(const Model& model, const Dataset& data, Split split);

/// Trains one model per seed with Adam on the MAE loss, keeping the
/// parameters with the lowest validation MAE. Seeds run on up to `threads`
/// workers; the report does not depend on the worker count.
/// Called after every validation evaluation with (seed, epoch, val MAE).
using TrainObserver = std::function<void(std::uint64_t, int, double)>;

TrainOutcome train(const TrainConfig& config, const Dataset& data, int threads = 1,
                   const TrainObserver& observer = {});

/// Single-seed training, exposed for tests.
SeedResult train_seed(const TrainConfig& config, const Dataset& data, std::uint64_t seed,
                      std::optional<Model>* best_model = nullptr, const TrainObserver& observer = {});

}  // namespace ginv
