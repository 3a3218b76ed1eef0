#include "kafnet/imts.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kafnet/error.hpp"

namespace kafnet {

std::size_t ImtsSample::num_observations() const {
  std::size_t n = 0;
  for (const auto& s : series) n += s.observations.size();
  return n;
}

std::size_t ImtsSample::num_queries() const {
  std::size_t n = 0;
  for (const auto& q : queries) n += q.size();
  return n;
}

void validate(const ImtsSample& sample) {
  const std::size_t n_var = sample.series.size();
  if (n_var == 0) throw ValidationError("sample has no variates");
  if (!sample.queries.empty() && sample.queries.size() != n_var) {
    throw ValidationError("sample has " + std::to_string(sample.queries.size()) + " query lists for " +
                          std::to_string(n_var) + " variates");
  }
  for (std::size_t n = 0; n < n_var; ++n) {
    const auto& obs = sample.series[n].observations;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (!std::isfinite(obs[i].time) || !std::isfinite(obs[i].value)) {
        throw ValidationError("variate " + std::to_string(n + 1) + ": non-finite observation");
      }
      if (i > 0 && !(obs[i].time > obs[i - 1].time)) {
        throw ValidationError("variate " + std::to_string(n + 1) + ": observation times not strictly increasing");
      }
    }
    if (sample.queries.empty()) continue;
    for (const Query& q : sample.queries[n]) {
      if (!std::isfinite(q.time) || (q.target && !std::isfinite(*q.target))) {
        throw ValidationError("variate " + std::to_string(n + 1) + ": non-finite query");
      }
      if (!obs.empty() && !(q.time > obs.back().time)) {
        throw ValidationError("variate " + std::to_string(n + 1) + ": query time " + std::to_string(q.time) +
                              " does not exceed last observation " + std::to_string(obs.back().time));
      }
    }
  }
}

ImtsSample quantize_times(ImtsSample sample, int decimals) {
  const double factor = std::pow(10.0, decimals);
  auto round_to = [factor](double t) { return std::round(t * factor) / factor; };
  for (auto& s : sample.series)
    for (auto& o : s.observations) o.time = round_to(o.time);
  for (auto& qs : sample.queries)
    for (auto& q : qs) q.time = round_to(q.time);
  return sample;
}

AlignedTriplet align(const ImtsSample& sample) {
  const std::size_t n_var = sample.series.size();
  if (n_var == 0) throw ValidationError("align: sample has no variates");
  if (sample.num_observations() == 0) throw ValidationError("align: sample has no observations");

  AlignedTriplet out;
  out.times.reserve(sample.num_observations());
  for (const auto& s : sample.series)
    for (const auto& o : s.observations) out.times.push_back(o.time);
  std::sort(out.times.begin(), out.times.end());
  out.times.erase(std::unique(out.times.begin(), out.times.end()), out.times.end());

  const std::size_t len = out.times.size();
  out.values = Tensor::matrix(len, n_var);
  out.mask = Tensor::matrix(len, n_var);
  for (std::size_t n = 0; n < n_var; ++n) {
    const auto& obs = sample.series[n].observations;
    // Both sequences are sorted, so a merge walk locates each row.
    std::size_t row = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (i > 0 && !(obs[i].time > obs[i - 1].time)) {
        throw ValidationError("align: variate " + std::to_string(n + 1) + " has non-increasing times");
      }
      while (out.times[row] < obs[i].time) ++row;
      out.values(row, n) = obs[i].value;
      out.mask(row, n) = 1.0;
    }
  }
  return out;
}

std::vector<double> normalize_grid(const std::vector<double>& times) {
  std::vector<double> out(times.size(), 0.0);
  if (times.size() < 2) return out;
  const double lo = times.front();
  const double span = times.back() - lo;
  if (span <= 0.0) return out;
  for (std::size_t l = 0; l < times.size(); ++l) out[l] = (times[l] - lo) / span;
  out.back() = 1.0;
  return out;
}

Tensor normalize_times(const AlignedTriplet& triplet, TimeNorm mode) {
  const std::size_t len = triplet.length();
  const std::size_t n_var = triplet.num_variates();
  Tensor out = Tensor::matrix(len, n_var);
  switch (mode) {
    case TimeNorm::None:
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t n = 0; n < n_var; ++n) out(l, n) = triplet.times[l];
      break;
    case TimeNorm::Global: {
      const auto grid = normalize_grid(triplet.times);
      for (std::size_t l = 0; l < len; ++l)
        for (std::size_t n = 0; n < n_var; ++n) out(l, n) = grid[l];
      break;
    }
    case TimeNorm::PerVariate:
      for (std::size_t n = 0; n < n_var; ++n) {
        std::size_t first = len, last = 0;
        for (std::size_t l = 0; l < len; ++l) {
          if (triplet.mask(l, n) != 0.0) {
            first = std::min(first, l);
            last = l;
          }
        }
        if (first == len || last == first) continue;
        const double lo = triplet.times[first];
        const double span = triplet.times[last] - lo;
        for (std::size_t l = 0; l < len; ++l) out(l, n) = (triplet.times[l] - lo) / span;
      }
      break;
  }
  return out;
}

}  // namespace kafnet
