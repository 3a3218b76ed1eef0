#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kafnet/autodiff.hpp"
#include "kafnet/imts.hpp"
#include "kafnet/model.hpp"

namespace kafnet {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;
  bool record_time = true;  // false writes 0 in the seconds column
};

// Throws ValidationError on unusable values (zero batch, zero patience,
// non-positive learning rate, invalid model shapes).
void validate(const TrainConfig& config);

// Values outside the reference hyperparameter grid; informational only.
std::vector<std::string> off_grid_warnings(const TrainConfig& config);

// ---- losses and metrics -------------------------------------------------------

// Per-variate averaged squared error: (1/N') sum_n (1/Q_n) sum_j r^2 over the
// N' variates with at least one query. Throws when no variate has queries.
double mse_loss(const std::vector<std::vector<double>>& predictions, const std::vector<std::vector<double>>& targets);

// Recorded version over a flat, variate-tagged prediction column.
ad::Var mse_loss(ad::Var predictions, const std::vector<double>& targets, const std::vector<std::size_t>& query_variate);

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

// Pooled over every queried point. Throws on an empty set.
Metrics metrics(const std::vector<double>& predictions, const std::vector<double>& targets);

// ---- optimizer ----------------------------------------------------------------

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  ad::ParamMap m;
  ad::ParamMap v;
};

// One bias-corrected Adam update in place. Returns false, leaving params and
// state untouched, when any gradient entry is non-finite.
bool adam_step(ad::ParamMap& params, const std::map<std::string, Tensor>& grads, AdamState& state, double lr);

double global_norm(const std::map<std::string, Tensor>& grads);

// Rescales so the global norm is at most max_norm; returns the pre-clip norm.
double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm);

// ---- training loop --------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  ModelParams best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  bool diverged = false;
  std::string message;
};

// Per-sample loss and gradient of the per-variate averaged squared error.
std::pair<double, std::map<std::string, Tensor>> sample_loss_and_grad(const ModelParams& params,
                                                                      const AlignedTriplet& triplet,
                                                                      const ImtsSample& sample);

// Sample visit order for an epoch; a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult train(const std::vector<ImtsSample>& train_set, const std::vector<ImtsSample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

// Predictions and targets for every query carrying a target, flattened in
// sample, variate, query order.
struct EvalOutput {
  std::vector<double> predictions;
  std::vector<double> targets;
};
EvalOutput evaluate_points(const ModelParams& params, const std::vector<ImtsSample>& samples);
Metrics evaluate(const ModelParams& params, const std::vector<ImtsSample>& samples);

// Predicts each variate's mean query target from the reference split.
Metrics mean_baseline(const std::vector<ImtsSample>& reference, const std::vector<ImtsSample>& samples);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace kafnet
