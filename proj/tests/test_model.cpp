#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "kafnet/diagnostics.hpp"
#include "kafnet/error.hpp"
#include "kafnet/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace kafnet;
using ad::Tape;
using ad::Var;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.kernels = 4;
  c.preconv_channels = 4;
  c.time_embed_dim = 5;
  c.hidden = 16;
  c.heads = 2;
  c.rff_dim = 16;
  c.blocks = 1;
  return c;
}

void randomize(ModelParams& p, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (auto& [name, t] : p.learnable)
    for (double& v : t.storage()) v = dist(rng);
}

std::vector<double> column(const Tensor& t, std::size_t c) {
  std::vector<double> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r) out[r] = t(r, c);
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(validate(c));
  c.hidden = 63;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = ModelConfig{};
  c.heads = 3;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = ModelConfig{};
  c.rff_dim = 7;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = ModelConfig{};
  c.kernels = 1;
  CHECK_THROWS_AS(validate(c), ValidationError);
  c = ModelConfig{};
  c.time_embed_dim = 2;
  CHECK_THROWS_AS(validate(c), ValidationError);
}

TEST_CASE("kernel centers span the unit interval") {
  auto c = kernel_centers(5);
  CHECK(c == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
}

TEST_CASE("parameter count matches shape arithmetic") {
  for (std::size_t blocks : {1u, 2u, 3u})
    for (std::size_t d : {8u, 32u, 64u}) {
      ModelConfig c;
      c.blocks = blocks;
      c.hidden = d;
      c.heads = d == 8 ? 2 : 4;
      c.time_embed_dim = 7;
      CHECK(init_params(c).parameter_count() == analytic_parameter_count(c));
    }
  ModelConfig compact;
  compact.hidden = 32;
  compact.blocks = 1;
  CHECK(analytic_parameter_count(compact) < 20000);
  CHECK(init_params(compact).parameter_count() == analytic_parameter_count(compact));
}

TEST_CASE("initialization is seeded and shaped") {
  auto a = init_params(ModelConfig{});
  auto b = init_params(ModelConfig{});
  CHECK(a.learnable == b.learnable);
  CHECK(a.buffers == b.buffers);
  CHECK(a.learnable.at("tka.gate") == Tensor::matrix(1, 8));
  CHECK(std::exp(a.learnable.at("tka.log_alpha")(0, 3)) == doctest::Approx(1.0 / 8));
  CHECK(a.buffers.at("block1.head3.omega").shape() == Shape{16, 32});
  CHECK(a.buffers.count("block0.head0.phase") == 1);
  for (double v : a.buffers.at("block0.head0.phase").data()) {
    CHECK(v >= 0.0);
    CHECK(v < 2.0 * std::numbers::pi);
  }
  ModelConfig other;
  other.rff_seed = 99;
  CHECK(init_params(other).buffers != a.buffers);
  CHECK(init_params(other).learnable == a.learnable);
}

TEST_CASE("time embedding examples") {
  auto mp = init_params(small_config());
  for (auto& name : {"te.b_s", "te.b_p", "te.b_c"}) mp.learnable.at(name) = Tensor::matrix(1, mp.learnable.at(name).cols());
  Tape tape;
  Bindings p(tape, mp);
  Var te = layers::time_embed(p, tape.constant(Tensor::column({0.0, 3.7})));
  // t = 0: [0, sin 0 ..., cos 0 ...]
  CHECK(te.value() (0, 0) == 0.0);
  CHECK(te.value()(0, 1) == 0.0);
  CHECK(te.value()(0, 2) == 0.0);
  CHECK(te.value()(0, 3) == 1.0);
  CHECK(te.value()(0, 4) == 1.0);
  for (std::size_t c = 1; c < 5; ++c) CHECK(std::abs(te.value()(1, c)) <= 1.0);

  mp.learnable.at("te.w_p") = Tensor::row({std::numbers::pi / 2, 0.0});
  Tape tape2;
  Bindings p2(tape2, mp);
  Var te2 = layers::time_embed(p2, tape2.constant(Tensor::column({1.0})));
  CHECK(te2.value()(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("pre-convolution matches a direct convolution sum") {
  auto mp = init_params(small_config());
  randomize(mp, 4);
  std::mt19937_64 rng(1);
  Tensor x = testing::random_matrix(7, 3, rng);
  Tape tape;
  Bindings p(tape, mp);
  Tensor got = layers::preconv_smooth(p, tape.constant(x)).value();
  for (std::size_t n = 0; n < 3; ++n) {
    auto want = oracle::preconv(mp.learnable, column(x, n));
    for (std::size_t l = 0; l < 7; ++l) CHECK(std::abs(got(l, n) - want[l]) < 1e-12);
  }
}

TEST_CASE("pre-convolution edge cases") {
  auto mp = init_params(small_config());
  randomize(mp, 5);
  SUBCASE("zero input, zero biases, zero time projection gives zero") {
    mp.learnable.at("preconv.b1") = Tensor::matrix(1, 4);
    mp.learnable.at("preconv.b2") = Tensor::matrix(1, 1);
    mp.learnable.at("te.w_t") = Tensor::matrix(5, 1);
    Tape tape;
    Bindings p(tape, mp);
    Tensor out = layers::encode_series(p, tape.constant(Tensor::matrix(6, 2)), {0, 1, 2, 3, 4, 5}).value();
    for (double v : out.data()) CHECK(v == 0.0);
  }
  SUBCASE("single row sees only the center tap") {
    Tape tape;
    Bindings p(tape, mp);
    const double v = 0.8;
    Tensor out = layers::preconv_smooth(p, tape.constant(Tensor::matrix(1, 1, v))).value();
    const auto& w1 = mp.learnable.at("preconv.w1");
    double want = mp.learnable.at("preconv.b2").item();
    for (std::size_t c = 0; c < 4; ++c)
      want += mp.learnable.at("preconv.w2")(c, 0) * std::max(0.0, w1(c, 1) * v + mp.learnable.at("preconv.b1")(0, c));
    CHECK(out(0, 0) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("kernel weights") {
  auto mp = init_params(small_config());
  SUBCASE("single observed point") {
    mp.config.kernels = 2;
    mp.learnable.at("tka.log_alpha") = Tensor::row({std::log(0.5), std::log(0.5)});
    Tape tape;
    Bindings p(tape, mp);
    Tensor a = layers::tka_weights(p, tape.constant(Tensor::column({0.3})), tape.constant(Tensor::column({1.0}))).value();
    CHECK(a == Tensor::row({1.0, 1.0}));
  }
  SUBCASE("masked rows and column sums against the elementwise formula") {
    randomize(mp, 6, 0.3);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t len = 1 + trial;
      std::vector<double> t(len), m(len);
      for (std::size_t l = 0; l < len; ++l) {
        t[l] = unit(rng);
        m[l] = unit(rng) < 0.6 ? 1.0 : 0.0;
      }
      m[0] = 1.0;
      Tape tape;
      Bindings p(tape, mp);
      Tensor a = layers::tka_weights(p, tape.constant(Tensor::column(t)), tape.constant(Tensor::column(m))).value();
      auto want = oracle::tka_coefficients(mp.learnable, t, m);
      for (std::size_t k = 0; k < 4; ++k) {
        double total = 0.0;
        for (std::size_t l = 0; l < len; ++l) {
          total += a(l, k);
          CHECK(std::abs(a(l, k) - want[l][k]) < 1e-12);
          if (m[l] == 0.0) CHECK(a(l, k) == 0.0);
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("kernel aggregation") {
  ModelConfig cfg = small_config();
  cfg.kernels = 8;
  cfg.hidden = 32;
  auto mp = init_params(cfg);
  randomize(mp, 7, 0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SUBCASE("constant signal is a fixed point of the pooling") {
    const double c = 1.7;
    std::vector<double> t{0.0, 0.2, 0.5, 0.9, 1.0}, m{1, 1, 0, 1, 1}, x{c, c, 0, c, c};
    Tape tape;
    Bindings p(tape, mp);
    Var coeffs = layers::tka_weights(p, tape.constant(Tensor::column(t)), tape.constant(Tensor::column(m)));
    Tensor z = layers::tka_aggregate(p, tape.constant(Tensor::column(x)), coeffs, tape.constant(Tensor::column(m))).value();
    // z = (sigmoid(g) * c ++ 1) W_proj
    const auto& w = mp.learnable.at("tka.w_proj");
    for (std::size_t j = 0; j < 32; ++j) {
      double want = w(8, j);
      for (std::size_t k = 0; k < 8; ++k) want += oracle::sigmoid(mp.learnable.at("tka.gate")(0, k)) * c * w(k, j);
      CHECK(std::abs(z(0, j) - want) < 1e-12);
    }
  }
  SUBCASE("empty variate gives a zero embedding") {
    Tape tape;
    Bindings p(tape, mp);
    Var m = tape.constant(Tensor::column({0, 0, 0}));
    Var coeffs = layers::tka_weights(p, tape.constant(Tensor::column({0, 0.5, 1})), m);
    Tensor z = layers::tka_aggregate(p, tape.constant(Tensor::column({0, 0, 0})), coeffs, m).value();
    for (double v : z.data()) CHECK(v == 0.0);
  }
  SUBCASE("random inputs against nested loops, single and batched") {
    const std::size_t len = 13, n = 4;
    Tensor x = testing::random_matrix(len, n, rng);
    Tensor t_hat = Tensor::matrix(len, n), mask = Tensor::matrix(len, n);
    for (std::size_t l = 0; l < len; ++l) {
      const double t = static_cast<double>(l) / (len - 1);
      for (std::size_t v = 0; v < n; ++v) {
        t_hat(l, v) = t;
        mask(l, v) = (v == 3) ? 0.0 : (unit(rng) < 0.5 ? 1.0 : 0.0);
        if (mask(l, v) == 0.0) x(l, v) = 0.0;
      }
    }
    mask(0, 0) = 1.0;
    Tape tape;
    Bindings p(tape, mp);
    Tensor batched = layers::tka(p, tape.constant(x), t_hat, mask).value();
    REQUIRE(batched.rows() == n);
    for (std::size_t v = 0; v < n; ++v) {
      auto want = oracle::tka_embed(mp.learnable, column(x, v), column(t_hat, v), column(mask, v));
      for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(batched(v, j) - want[j]) < 1e-12);
      Var m = tape.constant(Tensor::column(column(mask, v)));
      Var coeffs = layers::tka_weights(p, tape.constant(Tensor::column(column(t_hat, v))), m);
      Tensor single = layers::tka_aggregate(p, tape.constant(Tensor::column(column(x, v))), coeffs, m).value();
      for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(single(0, j) - want[j]) < 1e-12);
    }
  }
  SUBCASE("gate ablation drops the sigmoid") {
    mp.config.use_gate = false;
    std::vector<double> t{0.0, 0.4, 1.0}, m{1, 1, 1}, x{0.3, -1.0, 2.0};
    Tape tape;
    Bindings p(tape, mp);
    Tensor z = layers::tka(p, tape.constant(Tensor::column(x)), Tensor::column(t), Tensor::column(m)).value();
    auto want = oracle::tka_embed(mp.learnable, x, t, m, false);
    for (std::size_t j = 0; j < 32; ++j) CHECK(std::abs(z(0, j) - want[j]) < 1e-12);
  }
}

TEST_CASE("embedding width does not depend on grid length") {
  auto mp = init_params(small_config());
  for (std::size_t len : {1u, 10u, 100u, 10000u}) {
    Tensor x = Tensor::matrix(len, 2, 0.5), t = Tensor::matrix(len, 2), m = Tensor::matrix(len, 2, 1.0);
    for (std::size_t l = 0; l < len; ++l) t(l, 0) = t(l, 1) = len == 1 ? 0.0 : static_cast<double>(l) / (len - 1);
    Tape tape;
    Bindings p(tape, mp);
    CHECK(layers::tka(p, tape.constant(x), t, m).shape() == Shape{2, 16});
  }
}

TEST_CASE("random feature map identities") {
  std::mt19937_64 rng(31);
  Tensor omega = testing::random_matrix(6, 20, rng);
  Tensor phase = Tensor::matrix(1, 20);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  for (double& v : phase.storage()) v = ph(rng);
  Tensor x = testing::random_matrix(5, 6, rng, 2.0);
  Tape tape;
  Tensor phi = layers::rff_map(tape.constant(x), tape.constant(omega), tape.constant(phase)).value();
  Tensor phi0 = layers::rff_map(tape.constant(x), tape.constant(omega), tape.constant(Tensor::matrix(1, 20))).value();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(oracle::dot(oracle::row_of(phi, i), oracle::row_of(phi, i)) - 0.5) < 1e-14);
    for (std::size_t j = 0; j < 5; ++j) {
      const double with = oracle::dot(oracle::row_of(phi, i), oracle::row_of(phi, j));
      const double without = oracle::dot(oracle::row_of(phi0, i), oracle::row_of(phi0, j));
      CHECK(std::abs(with - without) < 1e-12);
      double direct = 0.0;
      for (std::size_t f = 0; f < 20; ++f) {
        double proj = 0.0;
        for (std::size_t c = 0; c < 6; ++c) proj += omega(c, f) * (x(i, c) - x(j, c));
        direct += std::cos(proj);
      }
      CHECK(std::abs(with - direct / 40.0) < 1e-12);
    }
  }
}

TEST_CASE("linear attention examples") {
  std::mt19937_64 rng(41);
  Tensor omega = testing::random_matrix(4, 8, rng), phase = Tensor::matrix(1, 8, 0.3);
  SUBCASE("single key returns V") {
    Tape tape;
    Tensor v = testing::random_matrix(1, 4, rng);
    Tensor o = layers::linear_attention(tape.constant(testing::random_matrix(1, 4, rng, 0.3)),
                                        tape.constant(testing::random_matrix(1, 4, rng, 0.3)), tape.constant(v),
                                        tape.constant(omega), tape.constant(phase))
                   .value();
    CHECK(max_abs_diff(o, v) < 1e-5);
  }
  SUBCASE("identical keys average V") {
    Tape tape;
    Tensor key = testing::random_matrix(1, 4, rng, 0.3);
    Tensor keys = Tensor::matrix(5, 4);
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 4; ++c) keys(r, c) = key(0, c);
    Tensor v = testing::random_matrix(5, 4, rng);
    Tensor o = layers::linear_attention(tape.constant(testing::random_matrix(3, 4, rng, 0.3)), tape.constant(keys),
                                        tape.constant(v), tape.constant(omega), tape.constant(phase))
                   .value();
    for (std::size_t c = 0; c < 4; ++c) {
      double mean = 0.0;
      for (std::size_t r = 0; r < 5; ++r) mean += v(r, c) / 5.0;
      for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(o(r, c) - mean) < 1e-5);
    }
  }
  SUBCASE("linear order equals quadratic order") {
    Tape tape;
    Tensor q = testing::random_matrix(6, 8, rng, 0.3), k = testing::random_matrix(6, 8, rng, 0.3);
    Tensor v = testing::random_matrix(6, 8, rng);
    Tensor om = testing::random_matrix(8, 16, rng), ph = Tensor::matrix(1, 16, 1.1);
    Tensor o = layers::linear_attention(tape.constant(q), tape.constant(k), tape.constant(v), tape.constant(om),
                                        tape.constant(ph))
                   .value();
    CHECK(max_abs_diff(o, oracle::quadratic_attention(q, k, v, om, ph)) < 1e-10);
  }
}

TEST_CASE("softmax attention rows are convex combinations") {
  std::mt19937_64 rng(2);
  Tape tape;
  Tensor v = Tensor::matrix(4, 3, 2.0);
  Tensor o = layers::softmax_attention(tape.constant(testing::random_matrix(4, 3, rng)),
                                       tape.constant(testing::random_matrix(4, 3, rng)), tape.constant(v))
                 .value();
  for (double x : o.data()) CHECK(x == doctest::Approx(2.0));
}

TEST_CASE("attention block matches a straight-line re-implementation") {
  ModelConfig cfg = small_config();
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.rff_dim = 16;
  auto mp = init_params(cfg);
  randomize(mp, 51, 0.3);
  std::mt19937_64 rng(52);
  Tensor z = testing::random_matrix(5, 16, rng);
  Tape tape;
  Bindings p(tape, mp);
  Tensor got = layers::fla_block(p, 0, tape.constant(z)).value();
  CHECK(max_abs_diff(got, oracle::fla_block(mp, 0, z)) < 1e-10);
}

TEST_CASE("attention block reduces to identity with zeroed residual branches") {
  auto mp = init_params(small_config());
  randomize(mp, 61);
  for (auto& [name, t] : mp.learnable) {
    const bool zero = name.find(".wv") != std::string::npos || name.find("mlp.w2") != std::string::npos ||
                      name.find("mlp.b2") != std::string::npos || name.find(".beta") != std::string::npos;
    if (zero) t = Tensor(t.shape(), 0.0);
  }
  std::mt19937_64 rng(62);
  for (std::size_t n : {1u, 3u, 8u}) {
    Tensor z = testing::random_matrix(n, 16, rng);
    Tape tape;
    Bindings p(tape, mp);
    Tensor out = layers::fla_block(p, 0, tape.constant(z)).value();
    CHECK(out.shape() == Shape{n, 16});
    CHECK(max_abs_diff(out, z) < 1e-12);
  }
}

TEST_CASE("probe captures normalized kernels consistent with the output") {
  auto mp = init_params(ModelConfig{});
  std::mt19937_64 rng(70);
  Tape tape;
  Bindings p(tape, mp);
  layers::AttentionProbe probe;
  layers::fla_block(p, 0, tape.constant(testing::random_matrix(6, 64, rng)), &probe);
  REQUIRE(probe.kernel.size() == 4);
  for (std::size_t h = 0; h < 4; ++h) {
    Tensor weights = probe.kernel[h];
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) total += weights(r, c);
      for (std::size_t c = 0; c < 6; ++c) weights(r, c) /= total + layers::kAttentionEps;
    }
    CHECK(max_abs_diff(matmul(weights, probe.value[h]), probe.output[h]) < 1e-10);
  }
}

namespace {
ImtsSample toy(std::size_t n) {
  ImtsSample s;
  s.series.resize(n);
  s.queries.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (int i = 0; i < 3; ++i) {
      const double t = 0.1 * i + 0.03 * static_cast<double>(v);
      s.series[v].observations.push_back({t, std::sin(3.0 * t + static_cast<double>(v))});
    }
    s.queries[v].push_back({0.9, 0.0});
  }
  return s;
}
}  // namespace

TEST_CASE("forward on a two-variate toy sample is finite and reproducible") {
  auto mp = init_params(ModelConfig{});
  auto a = predict(mp, toy(2));
  auto b = predict(mp, toy(2));
  REQUIRE(a.size() == 2);
  CHECK(a[0].size() == 1);
  CHECK(std::isfinite(a[0][0]));
  CHECK(std::isfinite(a[1][0]));
  CHECK(a == b);
}

TEST_CASE("forward rejects inconsistent queries") {
  auto mp = init_params(small_config());
  ImtsSample s = toy(2);
  for (auto& q : s.queries) q.clear();
  CHECK_THROWS_AS(predict(mp, s), ValidationError);
  s = toy(2);
  s.queries.pop_back();
  CHECK_THROWS_AS(predict(mp, s), ValidationError);
}

TEST_CASE("permuting variates permutes predictions") {
  auto mp = init_params(ModelConfig{});
  std::mt19937_64 rng(80);
  ImtsSample s = testing::random_sample(rng, 5, 8, 2, false);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  ImtsSample t;
  for (std::size_t i : perm) {
    t.series.push_back(s.series[i]);
    t.queries.push_back(s.queries[i]);
  }
  auto a = predict(mp, s), b = predict(mp, t);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(b[i][j] - a[perm[i]][j]) < 1e-10);
}

TEST_CASE("zeroed weights collapse every prediction to the head bias chain") {
  auto mp = init_params(ModelConfig{});
  randomize(mp, 90);
  for (auto& [name, t] : mp.learnable)
    if (name.rfind("out.", 0) != 0 || name == "out.w1") t = Tensor(t.shape(), 0.0);
  const auto& b1 = mp.learnable.at("out.b1");
  Tensor h1 = b1;
  for (double& v : h1.storage()) v = std::max(v, 0.0);
  Tensor h2 = matmul(h1, mp.learnable.at("out.w2"));
  for (std::size_t c = 0; c < h2.cols(); ++c) h2(0, c) = std::max(h2(0, c) + mp.learnable.at("out.b2")(0, c), 0.0);
  const double chain = matmul(h2, mp.learnable.at("out.w3")).item() + mp.learnable.at("out.b3").item();
  std::mt19937_64 rng(91);
  for (int trial = 0; trial < 5; ++trial) {
    auto pred = predict(mp, testing::random_sample(rng, 3, 6, 2, false));
    for (const auto& v : pred)
      for (double x : v) CHECK(x == doctest::Approx(chain).epsilon(1e-12));
  }
}

TEST_CASE("ablation switches run end to end") {
  std::mt19937_64 rng(95);
  ImtsSample s = testing::random_sample(rng, 3, 6, 1, false);
  for (int variant = 0; variant < 5; ++variant) {
    ModelConfig c = small_config();
    if (variant == 0) c.use_preconv = false;
    if (variant == 1) c.use_gate = false;
    if (variant == 2) c.attention = AttentionKind::Softmax;
    if (variant == 3) c.time_norm = TimeNorm::None;
    if (variant == 4) c.time_norm = TimeNorm::PerVariate;
    auto pred = predict(init_params(c), s);
    for (const auto& v : pred)
      for (double x : v) CHECK(std::isfinite(x));
  }
}

TEST_CASE("full model gradients pass finite differences") {
  for (int variant = 0; variant < 4; ++variant) {
    CAPTURE(variant);
    ModelConfig cfg = small_config();
    cfg.blocks = 2;
    if (variant == 1) cfg.attention = AttentionKind::Softmax;
    if (variant == 2) cfg.time_norm = TimeNorm::PerVariate;
    if (variant == 3) cfg.use_preconv = false;
    ModelParams mp = init_params(cfg);
    jitter_biases(mp, 5);
    auto report = model_grad_check(mp, toy_sample(), 1e-4, 1e-4);
    CHECK(report.entries.size() == mp.learnable.size());
    for (const auto& e : report.entries) {
      CAPTURE(e.name);
      CHECK(e.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("bias jitter only touches biases") {
  auto mp = init_params(small_config());
  auto before = mp.learnable;
  jitter_biases(mp, 1);
  CHECK(mp.learnable.at("out.w1") == before.at("out.w1"));
  CHECK(mp.learnable.at("block0.head0.wq") == before.at("block0.head0.wq"));
  CHECK(mp.learnable.at("preconv.b1") != before.at("preconv.b1"));
  CHECK(mp.learnable.at("block0.ln1.beta") != before.at("block0.ln1.beta"));
}

TEST_CASE("bench samples have the requested grid") {
  for (auto [len, n] : {std::pair<std::size_t, std::size_t>{256, 8}, {100, 64}, {5, 5}}) {
    auto s = bench_sample(len, n, 3);
    auto tri = align(s);
    CHECK(tri.length() == len);
    CHECK(tri.num_variates() == n);
  }
}

TEST_CASE("attention maps are row-stochastic and reproduce the head output") {
  for (auto kind : {AttentionKind::RandomFeature, AttentionKind::Softmax}) {
    ModelConfig cfg;
    cfg.attention = kind;
    auto maps = attention_maps(init_params(cfg), toy_sample());
    REQUIRE(maps.maps.size() == cfg.blocks * cfg.heads);
    CHECK(maps.max_output_mismatch < 1e-10);
    for (const auto& m : maps.maps) {
      CHECK(m.shape() == Shape{3, 3});
      for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(m(r, 0) + m(r, 1) + m(r, 2) - 1.0) < 1e-8);
    }
  }
}

TEST_CASE("checkpoint round trip is bitwise") {
  auto mp = init_params(small_config());
  randomize(mp, 100, 1.0);
  mp.learnable.at("out.b3") = Tensor::scalar(0.1 + 0.2);
  mp.learnable.at("te.b_s") = Tensor::scalar(-1e-300);
  const std::string text = serialize(mp);
  ModelParams back = deserialize(text);
  CHECK(back.learnable == mp.learnable);
  CHECK(back.buffers == mp.buffers);
  CHECK(serialize(back) == text);
  CHECK(config_to_json(back.config) == config_to_json(mp.config));
}

TEST_CASE("checkpoint parsing rejects malformed documents") {
  auto mp = init_params(small_config());
  std::string text = serialize(mp);
  CHECK_THROWS_AS(deserialize("{}"), ValidationError);
  CHECK_THROWS_AS(deserialize("not json"), ValidationError);
  std::string bad = text;
  bad.replace(bad.find("\"kafnet-checkpoint\""), 19, "\"something-else\"");
  CHECK_THROWS_AS(deserialize(bad), ValidationError);
  CHECK_THROWS_AS(config_from_json(R"({"hidden": 64, "bogus": 1})"), ValidationError);
}
