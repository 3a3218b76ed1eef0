#include <atomic>
#include <cmath>

#include "kafnet/error.hpp"
#include "kafnet/model.hpp"
#include "kafnet/spectral.hpp"

namespace kafnet::layers {

using ad::Var;

namespace {
std::atomic<std::uint64_t> g_degenerate{0};

Var affine_rows(const Bindings& p, Var x, const std::string& gamma, const std::string& beta) {
  const std::size_t r = x.rows(), c = x.cols();
  return ad::broadcast(p(gamma), r, c) * x + ad::broadcast(p(beta), r, c);
}

Var linear(const Bindings& p, Var x, const std::string& w, const std::string& b) {
  Var y = ad::matmul(x, p(w));
  return y + ad::broadcast(p(b), y.rows(), y.cols());
}
}  // namespace

std::uint64_t degenerate_denominator_count() { return g_degenerate.load(); }

Var time_embed(const Bindings& p, Var times) {
  const std::size_t m = times.rows();
  Var lin = ad::matmul(times, p("te.w_s")) + ad::broadcast(p("te.b_s"), m, 1);
  Var s = ad::sin(linear(p, times, "te.w_p", "te.b_p"));
  Var c = ad::cos(linear(p, times, "te.w_c", "te.b_c"));
  return ad::concat({lin, s, c}, 1);
}

Var preconv_smooth(const Bindings& p, Var x) {
  ad::Tape& tape = p.tape();
  const std::size_t len = x.rows(), n = x.cols();
  Var prev, next;
  if (len == 1) {
    prev = next = tape.constant(Tensor::matrix(1, n));
  } else {
    Var zero = tape.constant(Tensor::matrix(1, n));
    prev = ad::concat({zero, ad::slice(x, 0, 0, len - 1)}, 0);
    next = ad::concat({ad::slice(x, 0, 1, len), zero}, 0);
  }
  // im2col: one row per (l, n) cell holding the taps x_{l-1}, x_l, x_{l+1}.
  const std::size_t cells = len * n;
  Var taps = ad::concat({ad::reshape(prev, cells, 1), ad::reshape(x, cells, 1), ad::reshape(next, cells, 1)}, 1);
  const std::size_t channels = p.config().preconv_channels;
  Var hidden = ad::matmul(taps, ad::transpose(p("preconv.w1"))) + ad::broadcast(p("preconv.b1"), cells, channels);
  Var out = ad::matmul(ad::relu(hidden), p("preconv.w2")) + ad::broadcast(p("preconv.b2"), cells, 1);
  return ad::reshape(out, len, n);
}

Var encode_series(const Bindings& p, Var x, const std::vector<double>& times) {
  if (times.size() != x.rows()) throw ValidationError("encode_series: time grid and value rows differ");
  Var smooth = p.config().use_preconv ? preconv_smooth(p, x) : x;
  Var te = time_embed(p, p.tape().constant(Tensor::column(times)));
  Var shift = ad::matmul(te, p("te.w_t"));
  return smooth + ad::broadcast(shift, x.rows(), x.cols());
}

namespace {
// exp(-1/2 (t_hat - c_k)^2 / sigma_k^2) for a column of times, L x K.
Var gaussian_affinity(const Bindings& p, const Tensor& t_hat_col) {
  const std::size_t len = t_hat_col.rows();
  const auto centers = kernel_centers(p.config().kernels);
  const std::size_t k = centers.size();
  Tensor sq = Tensor::matrix(len, k);
  for (std::size_t l = 0; l < len; ++l)
    for (std::size_t j = 0; j < k; ++j) {
      const double diff = t_hat_col(l, 0) - centers[j];
      sq(l, j) = diff * diff;
    }
  Var inv_var = ad::exp(ad::scale(p("tka.log_alpha"), -2.0));
  Var expo = ad::scale(p.tape().constant(std::move(sq)) * ad::broadcast(inv_var, len, k), -0.5);
  return ad::exp(expo);
}

Var gate_and_project(const Bindings& p, Var pooled, const Tensor& mask) {
  const std::size_t n = pooled.rows(), k = pooled.cols();
  if (p.config().use_gate) pooled = ad::broadcast(ad::sigmoid(p("tka.gate")), n, k) * pooled;
  Tensor flag = Tensor::matrix(n, 1);
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t l = 0; l < mask.rows(); ++l)
      if (mask(l, v) != 0.0) {
        flag(v, 0) = 1.0;
        break;
      }
  Var features = ad::concat({pooled, p.tape().constant(std::move(flag))}, 1);
  return ad::matmul(features, p("tka.w_proj"));
}
}  // namespace

Var tka_weights(const Bindings& p, Var t_hat, Var mask) {
  const std::size_t len = t_hat.rows(), k = p.config().kernels;
  if (mask.rows() != len || t_hat.cols() != 1 || mask.cols() != 1) {
    throw ValidationError("tka_weights: expected matching L x 1 times and mask");
  }
  Var w = gaussian_affinity(p, t_hat.value()) * ad::broadcast(mask, len, k);
  return ad::div_or_zero(w, ad::broadcast(ad::sum_axis(w, 0), len, k));
}

Var tka_aggregate(const Bindings& p, Var x_hat, Var coeffs, Var mask) {
  Var pooled = ad::matmul(ad::transpose(x_hat), coeffs);  // 1 x K
  return gate_and_project(p, pooled, mask.value());
}

Var tka(const Bindings& p, Var x_hat, const Tensor& t_hat, const Tensor& mask) {
  ad::Tape& tape = p.tape();
  const std::size_t len = x_hat.rows(), n = x_hat.cols();
  Var m = tape.constant(mask);
  Var masked = x_hat * m;
  Var pooled;
  if (p.config().time_norm == TimeNorm::Global) {
    Tensor col = Tensor::matrix(len, 1);
    for (std::size_t l = 0; l < len; ++l) col(l, 0) = t_hat(l, 0);
    Var g = gaussian_affinity(p, col);
    // Column sums of w = g * m per variate, and the matching weighted sums.
    Var den = ad::matmul(ad::transpose(m), g);
    Var num = ad::matmul(ad::transpose(masked), g);
    pooled = ad::div_or_zero(num, den);
  } else {
    std::vector<Var> rows;
    rows.reserve(n);
    for (std::size_t v = 0; v < n; ++v) {
      Tensor col = Tensor::matrix(len, 1);
      for (std::size_t l = 0; l < len; ++l) col(l, 0) = t_hat(l, v);
      Var g = gaussian_affinity(p, col);
      Var den = ad::matmul(ad::transpose(ad::slice(m, 1, v, v + 1)), g);
      Var num = ad::matmul(ad::transpose(ad::slice(masked, 1, v, v + 1)), g);
      rows.push_back(ad::div_or_zero(num, den));
    }
    pooled = ad::concat(rows, 0);
  }
  return gate_and_project(p, pooled, mask);
}

double rff_input_scale(const ModelConfig& cfg) {
  // 1/sqrt(d) makes the unnormalized spectrum orthonormal and 1/sqrt(d_h)
  // keeps E|q|^2 independent of the head width. Without it |q - k| sits far
  // outside the unit kernel bandwidth, the random-feature row sums hover
  // around zero and the attention output is dominated by estimator noise.
  return 1.0 / std::sqrt(static_cast<double>(cfg.hidden) * static_cast<double>(cfg.head_dim()));
}

Var rff_map(Var x, Var omega, Var phase) {
  const std::size_t rows = x.rows(), half = omega.cols();
  Var arg = ad::matmul(x, omega) + ad::broadcast(phase, rows, half);
  return ad::scale(ad::concat({ad::cos(arg), ad::sin(arg)}, 1), 1.0 / std::sqrt(static_cast<double>(2 * half)));
}

Var linear_attention(Var q, Var k, Var v, Var omega, Var phase) {
  const std::size_t n = q.rows(), dv = v.cols();
  if (k.rows() != v.rows() || q.cols() != k.cols()) throw ValidationError("linear_attention: shape mismatch");
  Var phi_q = rff_map(q, omega, phase);
  Var phi_k = rff_map(k, omega, phase);
  Var kv = ad::matmul(ad::transpose(phi_k), v);                          // R x d_h
  Var num = ad::matmul(phi_q, kv);                                        // N x d_h
  Var den = ad::matmul(phi_q, ad::transpose(ad::sum_axis(phi_k, 0)));    // N x 1
  for (double s : den.value().data())
    if (std::abs(s) < kDegenerateDenominator) g_degenerate.fetch_add(1);
  return ad::div(num, ad::broadcast(ad::add_scalar(den, kAttentionEps), n, dv));
}

Var softmax_attention(Var q, Var k, Var v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), scale);
  return ad::matmul(ad::softmax_rows(scores), v);
}

Var fla_block(const Bindings& p, std::size_t block, Var z, AttentionProbe* probe) {
  const ModelConfig& cfg = p.config();
  const std::string pre = "block" + std::to_string(block) + ".";
  Var normed = affine_rows(p, ad::layernorm(z), pre + "ln1.gamma", pre + "ln1.beta");
  Var spectrum = spectral::rfft_rows(normed);

  std::vector<Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const std::string hp = pre + "head" + std::to_string(h) + ".";
    Var q = ad::matmul(spectrum, p(hp + "wq"));
    Var k = ad::matmul(spectrum, p(hp + "wk"));
    if (cfg.attention == AttentionKind::RandomFeature) {
      q = ad::scale(q, rff_input_scale(cfg));
      k = ad::scale(k, rff_input_scale(cfg));
    }
    Var v = ad::matmul(spectrum, p(hp + "wv"));
    Var o;
    if (cfg.attention == AttentionKind::Softmax) {
      o = softmax_attention(q, k, v);
    } else {
      o = linear_attention(q, k, v, p(hp + "omega"), p(hp + "phase"));
    }
    if (probe) {
      if (cfg.attention == AttentionKind::Softmax) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
        Tensor s = kafnet::matmul(q.value(), kafnet::transpose(k.value()));
        s *= scale;
        for (double& x : s.storage()) x = std::exp(x);
        probe->kernel.push_back(std::move(s));
      } else {
        Tensor fq = rff_map(q, p(hp + "omega"), p(hp + "phase")).value();
        Tensor fk = rff_map(k, p(hp + "omega"), p(hp + "phase")).value();
        probe->kernel.push_back(kafnet::matmul(fq, kafnet::transpose(fk)));
      }
      probe->value.push_back(v.value());
      probe->output.push_back(o.value());
    }
    heads.push_back(o);
  }
  Var u = z + spectral::irfft_rows(ad::concat(heads, 1));
  Var hidden = ad::relu(linear(p, affine_rows(p, ad::layernorm(u), pre + "ln2.gamma", pre + "ln2.beta"),
                               pre + "mlp.w1", pre + "mlp.b1"));
  return u + linear(p, hidden, pre + "mlp.w2", pre + "mlp.b2");
}

}  // namespace kafnet::layers
