#include "kafnet/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "kafnet/error.hpp"

namespace kafnet {

void validate(const ModelConfig& c) {
  auto fail = [](const std::string& msg) { throw ValidationError("model config: " + msg); };
  if (c.kernels < 2) fail("kernels must be >= 2");
  if (c.preconv_channels == 0) fail("preconv_channels must be >= 1");
  if (c.time_embed_dim < 3) fail("time_embed_dim must be >= 3");
  if (c.hidden < 2 || c.hidden % 2 != 0) fail("hidden must be even and >= 2");
  if (c.heads == 0 || c.hidden % c.heads != 0) fail("heads must divide hidden");
  if (c.rff_dim < 2 || c.rff_dim % 2 != 0) fail("rff_dim must be even and >= 2");
  if (c.blocks == 0) fail("blocks must be >= 1");
}

std::vector<double> kernel_centers(std::size_t k) {
  std::vector<double> c(k);
  for (std::size_t i = 0; i < k; ++i) c[i] = static_cast<double>(i) / static_cast<double>(k - 1);
  return c;
}

std::size_t analytic_parameter_count(const ModelConfig& c) {
  const std::size_t C = c.preconv_channels, te = c.time_embed_dim, K = c.kernels, d = c.hidden;
  const std::size_t preconv = 3 * C + C + C + 1;
  const std::size_t time_embed = 2 + 2 * (te - 1) + te;
  const std::size_t tka = 2 * K + (K + 1) * d;
  const std::size_t block = 3 * d * d + 4 * d + (d * 2 * d + 2 * d) + (2 * d * d + d);
  const std::size_t projection = d * d;
  const std::size_t head = (d + te) * d + d + d * d + d + d + 1;
  return preconv + time_embed + tka + c.blocks * block + projection + head;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : learnable) n += t.size();
  return n;
}

ModelParams init_params(const ModelConfig& config) {
  validate(config);
  ModelParams p;
  p.config = config;
  std::mt19937_64 rng(config.init_seed);

  auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::matrix(rows, cols);
    for (double& v : t.storage()) v = dist(rng);
    p.learnable.emplace(name, std::move(t));
  };
  auto fill = [&](const std::string& name, std::size_t rows, std::size_t cols, double value) {
    p.learnable.emplace(name, Tensor::matrix(rows, cols, value));
  };

  const std::size_t C = config.preconv_channels, te = config.time_embed_dim, K = config.kernels, d = config.hidden;
  weight("preconv.w1", C, 3, 3);
  fill("preconv.b1", 1, C, 0.0);
  weight("preconv.w2", C, 1, C);
  fill("preconv.b2", 1, 1, 0.0);

  weight("te.w_s", 1, 1, 1);
  fill("te.b_s", 1, 1, 0.0);
  weight("te.w_p", 1, config.sin_width(), 1);
  fill("te.b_p", 1, config.sin_width(), 0.0);
  weight("te.w_c", 1, config.cos_width(), 1);
  fill("te.b_c", 1, config.cos_width(), 0.0);
  weight("te.w_t", te, 1, te);

  fill("tka.log_alpha", 1, K, std::log(1.0 / static_cast<double>(K)));
  fill("tka.gate", 1, K, 0.0);
  weight("tka.w_proj", K + 1, d, K + 1);

  const std::size_t dh = config.head_dim();
  std::mt19937_64 rff_rng(config.rff_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b) + ".";
    fill(pre + "ln1.gamma", 1, d, 1.0);
    fill(pre + "ln1.beta", 1, d, 0.0);
    for (std::size_t h = 0; h < config.heads; ++h) {
      const std::string hp = pre + "head" + std::to_string(h) + ".";
      weight(hp + "wq", d, dh, d);
      weight(hp + "wk", d, dh, d);
      weight(hp + "wv", d, dh, d);
      Tensor omega = Tensor::matrix(dh, config.rff_dim / 2);
      for (double& v : omega.storage()) v = normal(rff_rng);
      Tensor ph = Tensor::matrix(1, config.rff_dim / 2);
      for (double& v : ph.storage()) v = phase(rff_rng);
      p.buffers.emplace(hp + "omega", std::move(omega));
      p.buffers.emplace(hp + "phase", std::move(ph));
    }
    fill(pre + "ln2.gamma", 1, d, 1.0);
    fill(pre + "ln2.beta", 1, d, 0.0);
    weight(pre + "mlp.w1", d, 2 * d, d);
    fill(pre + "mlp.b1", 1, 2 * d, 0.0);
    weight(pre + "mlp.w2", 2 * d, d, 2 * d);
    fill(pre + "mlp.b2", 1, d, 0.0);
  }

  weight("proj.w_a", d, d, d);
  weight("out.w1", d + te, d, d + te);
  fill("out.b1", 1, d, 0.0);
  weight("out.w2", d, d, d);
  fill("out.b2", 1, d, 0.0);
  weight("out.w3", d, 1, d);
  fill("out.b3", 1, 1, 0.0);
  return p;
}

Bindings::Bindings(ad::Tape& tape, const ModelParams& params) : tape_(tape), params_(params) {
  for (const auto& [name, t] : params.learnable) vars_.emplace(name, tape.parameter(name, t));
  for (const auto& [name, t] : params.buffers) vars_.emplace(name, tape.constant(t));
}

ad::Var Bindings::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw ValidationError("model: no parameter named '" + name + "'");
  return it->second;
}

ForwardResult forward(const Bindings& p, const AlignedTriplet& triplet, const std::vector<std::vector<Query>>& queries,
                      layers::AttentionProbe* probe) {
  const ModelConfig& cfg = p.config();
  ad::Tape& tape = p.tape();
  const std::size_t n_var = triplet.num_variates();
  if (queries.size() != n_var) {
    throw ValidationError("forward: " + std::to_string(queries.size()) + " query lists for " + std::to_string(n_var) +
                          " variates");
  }

  ad::Var x = tape.constant(triplet.values);
  ad::Var x_hat = layers::encode_series(p, x, triplet.times);
  const Tensor t_hat = normalize_times(triplet, cfg.time_norm);
  ad::Var z = layers::tka(p, x_hat, t_hat, triplet.mask);
  for (std::size_t b = 0; b < cfg.blocks; ++b) z = layers::fla_block(p, b, z, probe);
  ad::Var hidden = ad::matmul(z, p("proj.w_a"));

  ForwardResult result;
  result.hidden = hidden;
  std::vector<double> qtimes;
  for (std::size_t n = 0; n < n_var; ++n)
    for (const Query& q : queries[n]) {
      result.query_variate.push_back(n);
      qtimes.push_back(q.time);
    }
  if (qtimes.empty()) throw ValidationError("forward: no queries");

  const std::size_t nq = qtimes.size();
  const std::size_t d = cfg.hidden;
  ad::Var rows = ad::gather_rows(hidden, result.query_variate);
  ad::Var te = layers::time_embed(p, tape.constant(Tensor::column(std::move(qtimes))));
  ad::Var h = ad::concat({rows, te}, 1);
  h = ad::relu(ad::matmul(h, p("out.w1")) + ad::broadcast(p("out.b1"), nq, d));
  h = ad::relu(ad::matmul(h, p("out.w2")) + ad::broadcast(p("out.b2"), nq, d));
  result.predictions = ad::matmul(h, p("out.w3")) + ad::broadcast(p("out.b3"), nq, 1);
  return result;
}

std::vector<std::vector<double>> predict(const ModelParams& params, const ImtsSample& sample) {
  ad::Tape tape;
  Bindings p(tape, params);
  const AlignedTriplet triplet = align(sample);
  ForwardResult r = forward(p, triplet, sample.queries);
  std::vector<std::vector<double>> out(sample.num_variates());
  const Tensor& pred = r.predictions.value();
  for (std::size_t i = 0; i < r.query_variate.size(); ++i) out[r.query_variate[i]].push_back(pred[i]);
  return out;
}

}  // namespace kafnet
