#include "kafnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "kafnet/error.hpp"

namespace kafnet {

void validate(const TrainConfig& c) {
  validate(c.model);
  if (!(c.learning_rate > 0.0)) throw ValidationError("train config: learning_rate must be positive");
  if (c.batch_size == 0) throw ValidationError("train config: batch_size must be >= 1");
  if (c.max_epochs == 0) throw ValidationError("train config: max_epochs must be >= 1");
  if (c.patience == 0) throw ValidationError("train config: patience must be >= 1");
  if (!(c.clip_norm > 0.0)) throw ValidationError("train config: clip_norm must be positive");
}

std::vector<std::string> off_grid_warnings(const TrainConfig& c) {
  std::vector<std::string> out;
  auto check = [&out](const char* name, std::size_t v, std::initializer_list<std::size_t> grid) {
    if (std::find(grid.begin(), grid.end(), v) == grid.end()) {
      out.push_back(std::string(name) + "=" + std::to_string(v) + " is outside the reference grid");
    }
  };
  check("kernels", c.model.kernels, {2, 4, 8, 16});
  check("preconv_channels", c.model.preconv_channels, {8, 16, 32, 64});
  check("time_embed_dim", c.model.time_embed_dim, {16, 32, 64});
  check("hidden", c.model.hidden, {32, 64, 128, 256});
  check("blocks", c.model.blocks, {1, 2, 3, 4});
  if (c.learning_rate != 1e-3 && c.learning_rate != 1e-2) {
    out.push_back("learning_rate is outside the reference grid {1e-3, 1e-2}");
  }
  if ((c.model.hidden & (c.model.hidden - 1)) != 0) {
    out.push_back("hidden is not a power of two; the spectral transform falls back to direct summation");
  }
  return out;
}

double mse_loss(const std::vector<std::vector<double>>& predictions, const std::vector<std::vector<double>>& targets) {
  if (predictions.size() != targets.size()) throw ValidationError("mse_loss: variate count mismatch");
  double total = 0.0;
  std::size_t active = 0;
  for (std::size_t n = 0; n < predictions.size(); ++n) {
    if (predictions[n].size() != targets[n].size()) throw ValidationError("mse_loss: query count mismatch");
    if (targets[n].empty()) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < targets[n].size(); ++j) {
      const double r = predictions[n][j] - targets[n][j];
      s += r * r;
    }
    total += s / static_cast<double>(targets[n].size());
    ++active;
  }
  if (active == 0) throw ValidationError("mse_loss: no variate has queries");
  return total / static_cast<double>(active);
}

ad::Var mse_loss(ad::Var predictions, const std::vector<double>& targets, const std::vector<std::size_t>& query_variate) {
  if (predictions.rows() != targets.size() || targets.size() != query_variate.size() || predictions.cols() != 1) {
    throw ValidationError("mse_loss: predictions, targets and variate tags disagree in length");
  }
  if (targets.empty()) throw ValidationError("mse_loss: no variate has queries");
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t v : query_variate) ++counts[v];
  const double active = static_cast<double>(counts.size());
  Tensor weights = Tensor::matrix(targets.size(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    weights(i, 0) = 1.0 / (active * static_cast<double>(counts[query_variate[i]]));
  }
  ad::Tape& tape = *predictions.tape;
  ad::Var resid = predictions - tape.constant(Tensor::column(targets));
  return ad::sum(ad::square(resid) * tape.constant(std::move(weights)));
}

Metrics metrics(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) throw ValidationError("metrics: length mismatch");
  if (targets.empty()) throw ValidationError("metrics: empty query set");
  Metrics m;
  m.count = targets.size();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = targets[i] - predictions[i];
    m.mse += r * r;
    m.mae += std::abs(r);
  }
  m.mse /= static_cast<double>(m.count);
  m.mae /= static_cast<double>(m.count);
  return m;
}

bool adam_step(ad::ParamMap& params, const std::map<std::string, Tensor>& grads, AdamState& state, double lr) {
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) return false;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (auto& [name, p] : params) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const Tensor& g = git->second;
    if (g.shape() != p.shape()) throw ValidationError("adam_step: gradient shape mismatch for '" + name + "'");
    auto [mit, m_new] = state.m.try_emplace(name, p.shape(), 0.0);
    auto [vit, v_new] = state.v.try_emplace(name, p.shape(), 0.0);
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
  return true;
}

double global_norm(const std::map<std::string, Tensor>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double x : g.data()) sq += x * x;
  return std::sqrt(sq);
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

namespace {

void collect_targets(const ImtsSample& sample, std::vector<double>& targets) {
  for (const auto& qs : sample.queries)
    for (const Query& q : qs) {
      if (!q.target) throw ValidationError("training sample has a query without target");
      targets.push_back(*q.target);
    }
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::pair<double, std::map<std::string, Tensor>> sample_loss_and_grad(const ModelParams& params,
                                                                      const AlignedTriplet& triplet,
                                                                      const ImtsSample& sample) {
  ad::Tape tape;
  Bindings p(tape, params);
  ForwardResult r = forward(p, triplet, sample.queries);
  std::vector<double> targets;
  collect_targets(sample, targets);
  ad::Var loss = mse_loss(r.predictions, targets, r.query_variate);
  const double value = loss.value().item();
  return {value, tape.backward(loss)};
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix(seed, epoch));
  // Fisher-Yates with an explicit bound draw so the order does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

EvalOutput evaluate_points(const ModelParams& params, const std::vector<ImtsSample>& samples) {
  EvalOutput out;
  for (const ImtsSample& s : samples) {
    const auto pred = predict(params, s);
    for (std::size_t n = 0; n < s.queries.size(); ++n)
      for (std::size_t j = 0; j < s.queries[n].size(); ++j) {
        if (!s.queries[n][j].target) continue;
        out.predictions.push_back(pred[n][j]);
        out.targets.push_back(*s.queries[n][j].target);
      }
  }
  return out;
}

Metrics evaluate(const ModelParams& params, const std::vector<ImtsSample>& samples) {
  const EvalOutput e = evaluate_points(params, samples);
  return metrics(e.predictions, e.targets);
}

Metrics mean_baseline(const std::vector<ImtsSample>& reference, const std::vector<ImtsSample>& samples) {
  std::vector<double> sum, count;
  for (const ImtsSample& s : reference) {
    sum.resize(std::max(sum.size(), s.queries.size()), 0.0);
    count.resize(sum.size(), 0.0);
    for (std::size_t n = 0; n < s.queries.size(); ++n)
      for (const Query& q : s.queries[n])
        if (q.target) {
          sum[n] += *q.target;
          count[n] += 1.0;
        }
  }
  std::vector<double> preds, targets;
  for (const ImtsSample& s : samples)
    for (std::size_t n = 0; n < s.queries.size(); ++n)
      for (const Query& q : s.queries[n])
        if (q.target) {
          preds.push_back(n < count.size() && count[n] > 0 ? sum[n] / count[n] : 0.0);
          targets.push_back(*q.target);
        }
  return metrics(preds, targets);
}

TrainResult train(const std::vector<ImtsSample>& train_set, const std::vector<ImtsSample>& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  if (train_set.empty() || val_set.empty()) throw ValidationError("train: empty training or validation split");

  std::vector<AlignedTriplet> triplets;
  triplets.reserve(train_set.size());
  for (const ImtsSample& s : train_set) triplets.push_back(align(s));

  TrainResult result;
  ModelParams params = init_params(config.model);
  result.best = params;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  AdamState adam;
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto order = epoch_order(train_set.size(), config.seed, epoch);
    double loss_sum = 0.0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        std::map<std::string, Tensor> acc;
        // Fixed reduction order: samples are summed in batch order.
        for (std::size_t i = begin; i < end; ++i) {
          const std::size_t idx = order[i];
          auto [loss, grads] = sample_loss_and_grad(params, triplets[idx], train_set[idx]);
          if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
          loss_sum += loss;
          if (acc.empty()) {
            acc = std::move(grads);
          } else {
            for (auto& [name, g] : grads) acc[name] += g;
          }
        }
        const double inv = 1.0 / static_cast<double>(end - begin);
        for (auto& [name, g] : acc) g *= inv;
        clip_global_norm(acc, config.clip_norm);
        if (!adam_step(params.learnable, acc, adam, config.learning_rate)) {
          std::fprintf(stderr, "warning: epoch %zu: non-finite gradient, step skipped\n", epoch);
        }
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.message = "diverged at epoch " + std::to_string(epoch) + ": " + e.what();
      return result;
    }

    Metrics val;
    try {
      val = evaluate(params, val_set);
    } catch (const NumericError& e) {
      result.diverged = true;
      result.message = "diverged at epoch " + std::to_string(epoch) + " (validation): " + e.what();
      return result;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.val_mse = val.mse;
    rec.val_mae = val.mae;
    rec.seconds = config.record_time ? std::chrono::duration<double>(clock::now() - start).count() : 0.0;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_mse)) {
      result.diverged = true;
      result.message = "diverged at epoch " + std::to_string(epoch) + ": non-finite loss";
      return result;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (val.mse < result.best_val_mse) {
      result.best_val_mse = val.mse;
      result.best_epoch = epoch;
      result.best = params;
    } else if (epoch >= result.best_epoch + config.patience) {
      break;
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,val_mse,val_mae,seconds\n";
  char buf[256];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.3f\n", r.epoch, r.train_loss, r.val_mse, r.val_mae,
                  r.seconds);
    os << buf;
  }
  return os.str();
}

}  // namespace kafnet
