#pragma once

// Irregular multivariate time series: raw per-variate observations, query
// sets, and the canonical pre-aligned (times, values, mask) triplet.

#include <cstddef>
#include <optional>
#include <vector>

#include "kafnet/tensor.hpp"

namespace kafnet {

struct Observation {
  double time = 0.0;
  double value = 0.0;
};

struct RawSeries {
  std::vector<Observation> observations;  // strictly increasing in time
};

struct Query {
  double time = 0.0;
  std::optional<double> target;
};

struct ImtsSample {
  std::vector<RawSeries> series;              // one per variate
  std::vector<std::vector<Query>> queries;    // one list per variate

  std::size_t num_variates() const { return series.size(); }
  std::size_t num_observations() const;
  std::size_t num_queries() const;
};

// Checks the per-sample invariants: N >= 1, strictly increasing times per
// variate, query times beyond the variate's last observation, finite values.
// Throws ValidationError describing the first violation.
void validate(const ImtsSample& sample);

// Rounds every observation and query time to `decimals` decimal places, for
// sources whose timestamps carry float noise.
ImtsSample quantize_times(ImtsSample sample, int decimals);

struct AlignedTriplet {
  std::vector<double> times;  // length L, strictly increasing
  Tensor values;              // L x N, zero where unobserved
  Tensor mask;                // L x N, 1 where observed

  std::size_t length() const { return times.size(); }
  std::size_t num_variates() const { return values.cols(); }
};

// Canonical pre-alignment: merges every variate's timestamps into one sorted
// grid (bitwise-equal times collapse to one row), zero-fills unobserved cells.
AlignedTriplet align(const ImtsSample& sample);

enum class TimeNorm {
  Global,       // shared grid endpoints t_1, t_L
  PerVariate,   // each variate's own first/last observed time
  None,         // raw timestamps
};

// Min-max normalized grid times, L x N (one column per variate; all columns
// identical under TimeNorm::Global). A zero span maps to 0.
Tensor normalize_times(const AlignedTriplet& triplet, TimeNorm mode = TimeNorm::Global);

// Single-column convenience for the global mode.
std::vector<double> normalize_grid(const std::vector<double>& times);

}  // namespace kafnet
