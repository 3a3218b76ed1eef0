#pragma once

// Row-wise real FFT in a packed layout that stores exactly d reals per row:
//
//   [Re_0, Re_1, ..., Re_{d/2}, Im_1, ..., Im_{d/2-1}]
//
// Im_0 and Im_{d/2} are identically zero for real input and are dropped.
// Forward is unnormalized; the inverse carries the 1/d factor.

#include "kafnet/autodiff.hpp"
#include "kafnet/tensor.hpp"

namespace kafnet::spectral {

bool is_power_of_two(std::size_t n);

// Throws ValidationError unless d is even and >= 2.
void check_width(std::size_t d);

// Radix-2 for power-of-two widths, direct summation otherwise.
Tensor rfft_rows(const Tensor& z);
Tensor irfft_rows(const Tensor& packed);

// O(d^2) reference in the same packing.
Tensor naive_dft_rows(const Tensor& z);

// Sum of |X_k|^2 over all d complex bins of one packed row (the dropped
// conjugate half counted explicitly).
double packed_energy(const Tensor& packed, std::size_t row);

// Recorded versions; backward applies the transposed linear map.
ad::Var rfft_rows(ad::Var z);
ad::Var irfft_rows(ad::Var packed);

}  // namespace kafnet::spectral
