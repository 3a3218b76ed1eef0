#pragma once

// KAFNet forecaster: pre-convolution + time embedding, Gaussian temporal
// kernel aggregation, frequency linear attention blocks, query head.

#include <cstdint>
#include <string>
#include <vector>

#include "kafnet/autodiff.hpp"
#include "kafnet/imts.hpp"
#include "kafnet/tensor.hpp"

namespace kafnet {

enum class AttentionKind { RandomFeature, Softmax };

struct ModelConfig {
  std::size_t kernels = 8;          // K
  std::size_t preconv_channels = 16;  // C
  std::size_t time_embed_dim = 16;  // d_te
  std::size_t hidden = 64;          // d
  std::size_t heads = 4;            // H
  std::size_t rff_dim = 64;         // R
  std::size_t blocks = 2;           // B
  std::uint64_t init_seed = 1;
  std::uint64_t rff_seed = 2;

  // Ablation switches.
  bool use_preconv = true;
  bool use_gate = true;
  AttentionKind attention = AttentionKind::RandomFeature;
  TimeNorm time_norm = TimeNorm::Global;

  std::size_t head_dim() const { return hidden / heads; }
  std::size_t sin_width() const { return (time_embed_dim - 1) / 2; }
  std::size_t cos_width() const { return time_embed_dim - 1 - sin_width(); }
  std::size_t mlp_width() const { return 2 * hidden; }
};

// Throws ValidationError on inconsistent shapes (odd d, H not dividing d,
// odd R, K < 2, d_te < 3, zero sizes).
void validate(const ModelConfig& config);

// Learnable tensors and fixed random-feature buffers, keyed by name.
struct ModelParams {
  ModelConfig config;
  ad::ParamMap learnable;
  ad::ParamMap buffers;  // RFF frequencies and phases; never trained

  std::size_t parameter_count() const;
};

// Closed-form learnable parameter count from the configuration alone.
std::size_t analytic_parameter_count(const ModelConfig& config);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
// layernorm scales, sigma_k = 1/K, gate 0. RFF frequencies ~ N(0, 1) and
// phases ~ U[0, 2pi) drawn from rff_seed.
ModelParams init_params(const ModelConfig& config);

// Fixed kernel centers c_k = k / (K - 1).
std::vector<double> kernel_centers(std::size_t k);

// Registers every learnable tensor on a tape and hands out the handles.
class Bindings {
 public:
  Bindings(ad::Tape& tape, const ModelParams& params);
  ad::Var operator()(const std::string& name) const;
  ad::Tape& tape() const { return tape_; }
  const ModelConfig& config() const { return params_.config; }

 private:
  ad::Tape& tape_;
  const ModelParams& params_;
  std::map<std::string, ad::Var> vars_;
};

namespace layers {

inline constexpr double kAttentionEps = 1e-6;
inline constexpr double kDegenerateDenominator = 1e-12;

// Number of linear-attention rows whose pre-epsilon denominator fell below
// kDegenerateDenominator, process wide.
std::uint64_t degenerate_denominator_count();

// [w_s t + b_s, sin(W_p t + b_p), cos(W_c t + b_c)] for a column of times.
ad::Var time_embed(const Bindings& p, ad::Var times);

// Conv_{1x1}(ReLU(Conv_{1x3}(x))) column by column, zero same-padding,
// one filter bank shared by all columns. x is L x N.
ad::Var preconv_smooth(const Bindings& p, ad::Var x);

// Smoothed series plus the projected time embedding of the grid times.
ad::Var encode_series(const Bindings& p, ad::Var x, const std::vector<double>& times);

// Kernel coefficients for one variate: t_hat and mask are L x 1, result L x K.
ad::Var tka_weights(const Bindings& p, ad::Var t_hat, ad::Var mask);

// Pools one variate (x_hat L x 1) with coefficients A into a 1 x d row.
ad::Var tka_aggregate(const Bindings& p, ad::Var x_hat, ad::Var coeffs, ad::Var mask);

// All variates at once; t_hat, mask, x_hat are L x N, result N x d.
ad::Var tka(const Bindings& p, ad::Var x_hat, const Tensor& t_hat, const Tensor& mask);

// (1/sqrt(R)) [cos(X Omega + b), sin(X Omega + b)].
ad::Var rff_map(ad::Var x, ad::Var omega, ad::Var phase);

// Fixed factor applied to Q and K ahead of the random-feature map inside
// fla_block.
double rff_input_scale(const ModelConfig& cfg);

// phi(Q) (phi(K)^T V) / (phi(Q) (phi(K)^T 1) + eps), evaluated in the
// linear-cost association order.
ad::Var linear_attention(ad::Var q, ad::Var k, ad::Var v, ad::Var omega, ad::Var phase);

ad::Var softmax_attention(ad::Var q, ad::Var k, ad::Var v);

// Per block/head intermediate values captured for attention inspection.
struct AttentionProbe {
  std::vector<Tensor> kernel;  // phi(Q) phi(K)^T, N x N
  std::vector<Tensor> value;   // V, N x d_h
  std::vector<Tensor> output;  // O from the linear-order path
};

ad::Var fla_block(const Bindings& p, std::size_t block, ad::Var z, AttentionProbe* probe = nullptr);

}  // namespace layers

struct ForwardResult {
  ad::Var predictions;                    // total_queries x 1, variate-major
  ad::Var hidden;                         // H, N x d
  std::vector<std::size_t> query_variate;  // variate of each prediction row
};

// Full pipeline for one aligned sample. queries[n] lists variate n's query
// times; targets are ignored.
ForwardResult forward(const Bindings& p, const AlignedTriplet& triplet, const std::vector<std::vector<Query>>& queries,
                      layers::AttentionProbe* probe = nullptr);

// Convenience: predictions grouped per variate.
std::vector<std::vector<double>> predict(const ModelParams& params, const ImtsSample& sample);

// ---- checkpoints -------------------------------------------------------------

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

std::string serialize(const ModelParams& params);
ModelParams deserialize(const std::string& text);
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace kafnet
