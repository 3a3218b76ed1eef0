#include "kafnet/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "kafnet/error.hpp"
#include "kafnet/training.hpp"

namespace kafnet {

ImtsSample toy_sample() {
  ImtsSample s;
  s.series = {
      RawSeries{{{0.00, 0.20}, {0.15, 0.65}, {0.40, -0.10}, {0.70, 0.35}}},
      RawSeries{{{0.05, -0.40}, {0.40, 0.90}, {0.55, 0.15}}},
      RawSeries{{{0.10, 1.10}, {0.30, 0.75}, {0.65, -0.55}, {0.80, -0.20}, {0.85, 0.05}}},
  };
  s.queries = {{{0.90, 0.30}, {1.00, 0.10}}, {{0.95, -0.25}}, {{0.90, 0.40}, {1.00, 0.60}}};
  return s;
}

void jitter_biases(ModelParams& params, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& [name, t] : params.learnable) {
    const bool bias = name.ends_with(".beta") || name.find(".b") != std::string::npos;
    if (!bias) continue;
    for (double& v : t.storage()) v += dist(rng);
  }
}

ad::GradCheckReport model_grad_check(const ModelParams& params, const ImtsSample& sample, double h, double tol,
                                     std::size_t max_entries_per_param) {
  validate(sample);
  const AlignedTriplet triplet = align(sample);
  std::vector<double> targets;
  for (const auto& qs : sample.queries)
    for (const Query& q : qs) {
      if (!q.target) throw ValidationError("gradcheck: every query needs a target");
      targets.push_back(*q.target);
    }
  ad::TapeProgram program = [&](ad::Tape& tape, const ad::ParamMap& learnable) {
    ModelParams local{params.config, learnable, params.buffers};
    Bindings p(tape, local);
    ForwardResult r = forward(p, triplet, sample.queries);
    return mse_loss(r.predictions, targets, r.query_variate);
  };
  return ad::grad_check(program, params.learnable, h, tol, max_entries_per_param);
}

ImtsSample bench_sample(std::size_t length, std::size_t variates, std::uint64_t seed) {
  if (length == 0 || variates == 0) throw ValidationError("bench: length and variates must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> value(0.0, 1.0);
  ImtsSample s;
  s.series.resize(variates);
  s.queries.resize(variates);
  for (std::size_t l = 0; l < length; ++l) {
    const double t = static_cast<double>(l) / static_cast<double>(length);
    s.series[l % variates].observations.push_back({t, value(rng)});
  }
  for (auto& q : s.queries) q.push_back({1.0, std::nullopt});
  return s;
}

double median_forward_seconds(const ModelParams& params, const ImtsSample& sample, std::size_t reps) {
  if (reps == 0) throw ValidationError("bench: repetitions must be >= 1");
  std::vector<double> times;
  times.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    ad::Tape tape;
    Bindings p(tape, params);
    ForwardResult out = forward(p, align(sample), sample.queries);
    const auto stop = std::chrono::steady_clock::now();
    if (!out.predictions.value().all_finite()) throw NumericError("bench: non-finite prediction");
    times.push_back(std::chrono::duration<double>(stop - start).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t mid = times.size() / 2;
  return times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
}

AttentionMaps attention_maps(const ModelParams& params, const ImtsSample& sample) {
  validate(sample);
  ad::Tape tape;
  Bindings p(tape, params);
  layers::AttentionProbe probe;
  forward(p, align(sample), sample.queries, &probe);

  AttentionMaps out;
  const bool softmax = params.config.attention == AttentionKind::Softmax;
  for (std::size_t i = 0; i < probe.kernel.size(); ++i) {
    const Tensor& kernel = probe.kernel[i];
    const std::size_t n = kernel.rows();
    Tensor map = kernel, shifted = kernel;
    for (std::size_t r = 0; r < n; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < n; ++c) total += kernel(r, c);
      const double shift = softmax ? 0.0 : layers::kAttentionEps;
      for (std::size_t c = 0; c < n; ++c) {
        map(r, c) = kernel(r, c) / total;
        shifted(r, c) = kernel(r, c) / (total + shift);
      }
    }
    out.max_output_mismatch = std::max(out.max_output_mismatch, max_abs_diff(matmul(shifted, probe.value[i]), probe.output[i]));
    out.maps.push_back(std::move(map));
    out.block.push_back(i / params.config.heads);
    out.head.push_back(i % params.config.heads);
  }
  return out;
}

}  // namespace kafnet
