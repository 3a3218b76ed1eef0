#include "kafnet/spectral.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "kafnet/error.hpp"

namespace kafnet::spectral {

namespace {

using cplx = std::complex<double>;

// In-place iterative Cooley-Tukey, forward sign (e^{-2 pi i k l / n}).
void fft_inplace(std::vector<cplx>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<cplx> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      tw[k] = cplx(std::cos(ang), std::sin(ang));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

void pack_row(const std::vector<cplx>& bins, double* out, std::size_t d) {
  const std::size_t half = d / 2;
  for (std::size_t k = 0; k <= half; ++k) out[k] = bins[k].real();
  for (std::size_t k = 1; k < half; ++k) out[half + k] = bins[k].imag();
}

// Full conjugate-symmetric spectrum from a packed row.
std::vector<cplx> unpack_row(const double* in, std::size_t d) {
  const std::size_t half = d / 2;
  std::vector<cplx> bins(d);
  bins[0] = cplx(in[0], 0.0);
  bins[half] = cplx(in[half], 0.0);
  for (std::size_t k = 1; k < half; ++k) {
    bins[k] = cplx(in[k], in[half + k]);
    bins[d - k] = std::conj(bins[k]);
  }
  return bins;
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void check_width(std::size_t d) {
  if (d < 2 || d % 2 != 0) {
    throw ValidationError("spectral: row width must be even and >= 2, got " + std::to_string(d));
  }
}

Tensor naive_dft_rows(const Tensor& z) {
  const std::size_t rows = z.rows(), d = z.cols();
  check_width(d);
  Tensor out = Tensor::matrix(rows, d);
  std::vector<cplx> bins(d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k <= d / 2; ++k) {
      cplx acc = 0.0;
      for (std::size_t l = 0; l < d; ++l) {
        // Reduce k*l mod d before the angle to keep the argument small.
        const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * l) % d) / static_cast<double>(d);
        acc += z(r, l) * cplx(std::cos(ang), std::sin(ang));
      }
      bins[k] = acc;
    }
    pack_row(bins, &out(r, 0), d);
  }
  return out;
}

Tensor rfft_rows(const Tensor& z) {
  const std::size_t rows = z.rows(), d = z.cols();
  check_width(d);
  if (!is_power_of_two(d)) return naive_dft_rows(z);
  Tensor out = Tensor::matrix(rows, d);
  std::vector<cplx> buf(d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t l = 0; l < d; ++l) buf[l] = cplx(z(r, l), 0.0);
    fft_inplace(buf);
    pack_row(buf, &out(r, 0), d);
  }
  return out;
}

Tensor irfft_rows(const Tensor& packed) {
  const std::size_t rows = packed.rows(), d = packed.cols();
  check_width(d);
  Tensor out = Tensor::matrix(rows, d);
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<cplx> bins = unpack_row(packed.data().data() + r * d, d);
    if (is_power_of_two(d)) {
      // Inverse via conjugation: ifft(X) = conj(fft(conj(X))) / d.
      for (auto& b : bins) b = std::conj(b);
      fft_inplace(bins);
      for (std::size_t l = 0; l < d; ++l) out(r, l) = bins[l].real() * inv_d;
    } else {
      for (std::size_t l = 0; l < d; ++l) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          const double ang = 2.0 * std::numbers::pi * static_cast<double>((k * l) % d) / static_cast<double>(d);
          acc += bins[k].real() * std::cos(ang) - bins[k].imag() * std::sin(ang);
        }
        out(r, l) = acc * inv_d;
      }
    }
  }
  return out;
}

double packed_energy(const Tensor& packed, std::size_t row) {
  const std::size_t d = packed.cols();
  const std::size_t half = d / 2;
  double e = packed(row, 0) * packed(row, 0) + packed(row, half) * packed(row, half);
  for (std::size_t k = 1; k < half; ++k) {
    e += 2.0 * (packed(row, k) * packed(row, k) + packed(row, half + k) * packed(row, half + k));
  }
  return e;
}

ad::Var rfft_rows(ad::Var z) {
  check_width(z.cols());
  return z.tape->record("rfft_rows", rfft_rows(z.value()), {z}, [](const ad::BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    // Transpose of the packed forward DFT is d * irfft of the gradient with
    // the interior bins halved.
    const std::size_t d = ctx.grad.cols(), half = d / 2;
    Tensor adj = ctx.grad;
    for (std::size_t r = 0; r < adj.rows(); ++r)
      for (std::size_t k = 1; k < half; ++k) {
        adj(r, k) *= 0.5;
        adj(r, half + k) *= 0.5;
      }
    Tensor back = irfft_rows(adj);
    back *= static_cast<double>(d);
    *g += back;
  });
}

ad::Var irfft_rows(ad::Var packed) {
  check_width(packed.cols());
  return packed.tape->record("irfft_rows", irfft_rows(packed.value()), {packed}, [](const ad::BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    // Transpose of the inverse: forward DFT scaled by 1/d on the DC and
    // Nyquist bins and 2/d on the interior bins.
    const std::size_t d = ctx.grad.cols(), half = d / 2;
    Tensor back = rfft_rows(ctx.grad);
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t r = 0; r < back.rows(); ++r)
      for (std::size_t k = 0; k < d; ++k) back(r, k) *= (k == 0 || k == half) ? inv_d : 2.0 * inv_d;
    *g += back;
  });
}

}  // namespace kafnet::spectral
