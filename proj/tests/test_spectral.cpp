#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "kafnet/error.hpp"
#include "kafnet/spectral.hpp"
#include "support.hpp"

using namespace kafnet;
using namespace kafnet::spectral;

TEST_CASE("constant row is pure DC") {
  Tensor z = Tensor::matrix(1, 8, 1.5);
  Tensor s = rfft_rows(z);
  CHECK(s(0, 0) == doctest::Approx(12.0).epsilon(1e-15));
  for (std::size_t k = 1; k < 8; ++k) CHECK(std::abs(s(0, k)) < 1e-12);
}

TEST_CASE("single cosine lands in bin one") {
  const std::size_t d = 16;
  Tensor z = Tensor::matrix(1, d);
  for (std::size_t l = 0; l < d; ++l) z(0, l) = std::cos(2.0 * std::numbers::pi * static_cast<double>(l) / d);
  Tensor s = rfft_rows(z);
  for (std::size_t k = 0; k < d; ++k) CHECK(std::abs(s(0, k) - (k == 1 ? d / 2.0 : 0.0)) < 1e-12);
}

TEST_CASE("smallest width") {
  Tensor s = naive_dft_rows(Tensor::row({3, 5}));
  CHECK(s == Tensor::row({8, -2}));
  CHECK(max_abs_diff(rfft_rows(Tensor::row({3, 5})), s) < 1e-15);
}

TEST_CASE("inverse of DC and zero spectra") {
  Tensor dc = Tensor::matrix(1, 8);
  dc(0, 0) = 8.0;
  const Tensor ones = irfft_rows(dc);
  for (double v : ones.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
  const Tensor zeros = irfft_rows(Tensor::matrix(2, 8));
  for (double v : zeros.data()) CHECK(v == 0.0);
}

TEST_CASE("radix-2 agrees with the naive DFT and round-trips") {
  std::mt19937_64 rng(21);
  for (std::size_t d : {4u, 8u, 16u, 64u, 256u}) {
    CAPTURE(d);
    Tensor z = testing::random_matrix(200, d, rng);
    Tensor fast = rfft_rows(z);
    CHECK(max_abs_diff(fast, naive_dft_rows(z)) < 1e-10);
    CHECK(max_abs_diff(irfft_rows(fast), z) < 1e-10);
  }
}

TEST_CASE("non power-of-two widths fall back to direct summation") {
  std::mt19937_64 rng(2);
  Tensor z = testing::random_matrix(3, 12, rng);
  CHECK(max_abs_diff(rfft_rows(z), naive_dft_rows(z)) < 1e-12);
  CHECK(max_abs_diff(irfft_rows(rfft_rows(z)), z) < 1e-12);
}

TEST_CASE("odd or tiny widths are rejected") {
  CHECK_THROWS_AS(rfft_rows(Tensor::matrix(1, 7)), ValidationError);
  CHECK_THROWS_AS(rfft_rows(Tensor::matrix(1, 0)), ValidationError);
  CHECK_THROWS_AS(check_width(1), ValidationError);
  CHECK_NOTHROW(check_width(2));
}

TEST_CASE("Parseval") {
  std::mt19937_64 rng(4);
  for (std::size_t d : {4u, 16u, 64u, 256u}) {
    Tensor z = testing::random_matrix(20, d, rng);
    Tensor s = rfft_rows(z);
    for (std::size_t r = 0; r < 20; ++r) {
      double energy = 0.0;
      for (std::size_t l = 0; l < d; ++l) energy += z(r, l) * z(r, l);
      CHECK(std::abs(packed_energy(s, r) / static_cast<double>(d) - energy) <= 1e-9 * energy);
    }
  }
}

TEST_CASE("linearity") {
  std::mt19937_64 rng(6);
  Tensor x = testing::random_matrix(4, 32, rng), y = testing::random_matrix(4, 32, rng);
  Tensor mix = x;
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.0 * x[i] - 0.5 * y[i];
  Tensor fx = rfft_rows(x), fy = rfft_rows(y), expect = fx;
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = 2.0 * fx[i] - 0.5 * fy[i];
  CHECK(max_abs_diff(rfft_rows(mix), expect) < 1e-10);
}

TEST_CASE("both transforms pass grad_check") {
  std::mt19937_64 rng(12);
  for (std::size_t d : {2u, 8u, 6u}) {
    CAPTURE(d);
    Tensor probe = testing::random_matrix(3, d, rng);
    ad::ParamMap params{{"z", testing::random_matrix(3, d, rng)}};
    ad::TapeProgram fwd = [probe](ad::Tape& t, const ad::ParamMap& p) {
      return ad::sum(rfft_rows(t.parameter("z", p.at("z"))) * t.constant(probe));
    };
    ad::TapeProgram inv = [probe](ad::Tape& t, const ad::ParamMap& p) {
      return ad::sum(irfft_rows(t.parameter("z", p.at("z"))) * t.constant(probe));
    };
    CHECK(ad::grad_check(fwd, params, 1e-4, 1e-4).pass);
    CHECK(ad::grad_check(inv, params, 1e-4, 1e-4).pass);
  }
}
