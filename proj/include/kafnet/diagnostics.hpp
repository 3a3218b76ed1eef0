#pragma once

// Support for the gradcheck, bench and inspect commands: a fixed toy sample,
// whole-model finite-difference checks, forward timing and attention maps.

#include <cstdint>
#include <vector>

#include "kafnet/autodiff.hpp"
#include "kafnet/imts.hpp"
#include "kafnet/model.hpp"

namespace kafnet {

// Three variates with a handful of asynchronous observations and one
// targeted query each.
ImtsSample toy_sample();

// Zero-initialized biases put every ReLU fed by an all-zero tap window
// exactly on its kink, where central differences disagree with any one-sided
// derivative. This moves such bias vectors to U(-scale, scale).
void jitter_biases(ModelParams& params, std::uint64_t seed, double scale = 0.1);

// Finite-difference check of the training loss on one sample for every
// learnable tensor. max_entries_per_param = 0 checks every entry.
ad::GradCheckReport model_grad_check(const ModelParams& params, const ImtsSample& sample, double h, double tol,
                                     std::size_t max_entries_per_param = 0);

// Sample whose aligned grid has exactly `length` rows spread round-robin
// over `variates` variates, one query each.
ImtsSample bench_sample(std::size_t length, std::size_t variates, std::uint64_t seed);

// Median wall time in seconds of `reps` forward passes (alignment included).
double median_forward_seconds(const ModelParams& params, const ImtsSample& sample, std::size_t reps);

// Row-normalized N x N attention weights per block and head, in block-major
// order. Rows of the random-feature kernel are divided by their sum; the
// softmax variant is already normalized.
struct AttentionMaps {
  std::vector<Tensor> maps;
  std::vector<std::size_t> block, head;
  // Largest |normalized map applied to V - recorded head output| over all
  // maps, using the epsilon-shifted denominator of the forward pass.
  double max_output_mismatch = 0.0;
};
AttentionMaps attention_maps(const ModelParams& params, const ImtsSample& sample);

}  // namespace kafnet
