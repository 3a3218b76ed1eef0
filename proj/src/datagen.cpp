#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "kafnet/datagen.hpp"
#include "kafnet/error.hpp"

namespace kafnet {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kDatasetStream = 0xD5A7A5E7ULL;
constexpr std::uint64_t kSplitStream = 0x5B117ULL;
constexpr int kMaxRetries = 100;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Poisson process on [0, span) with `expected` points on average.
std::vector<double> poisson_times(std::mt19937_64& rng, double span, double expected) {
  std::vector<double> t;
  std::exponential_distribution<double> gap(expected / span);
  double now = gap(rng);
  while (now < span) {
    t.push_back(now);
    now += gap(rng);
  }
  return t;
}

struct VariateSignal {
  std::vector<double> amp, freq, phase;
  double decay = 0.0;
  std::vector<double> knots, levels;  // piecewise trend

  double operator()(SignalFamily family, double t) const {
    switch (family) {
      case SignalFamily::SinusoidMixture: {
        double v = 0.0;
        for (std::size_t c = 0; c < amp.size(); ++c) v += amp[c] * std::sin(2.0 * std::numbers::pi * freq[c] * t + phase[c]);
        return v;
      }
      case SignalFamily::DampedOscillation:
        return amp[0] * std::exp(-decay * t) * std::cos(2.0 * std::numbers::pi * freq[0] * t + phase[0]);
      case SignalFamily::PiecewiseTrend: {
        std::size_t s = 0;
        while (s + 2 < knots.size() && t >= knots[s + 1]) ++s;
        const double frac = (t - knots[s]) / (knots[s + 1] - knots[s]);
        return levels[s] + frac * (levels[s + 1] - levels[s]);
      }
    }
    return 0.0;
  }
};

ImtsSample generate_one(const SynthSpec& spec, const std::vector<std::vector<double>>& fixed_freq, std::size_t index) {
  std::mt19937_64 rng(mix(spec.seed, index + 1));
  const double obs_span = spec.window * (1.0 - spec.horizon);
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    ImtsSample sample;
    sample.series.resize(spec.n_variates);
    sample.queries.resize(spec.n_variates);

    std::vector<std::vector<double>> times(spec.n_variates);
    if (spec.asynchrony == Asynchrony::Independent) {
      for (auto& t : times) t = poisson_times(rng, obs_span, spec.intensity);
    } else if (spec.asynchrony == Asynchrony::SharedGrid) {
      const auto grid = poisson_times(rng, obs_span, spec.intensity);
      for (auto& t : times) t = grid;
    } else {
      // Shared grid thinned by half plus private points at half the rate.
      const auto grid = poisson_times(rng, obs_span, spec.intensity);
      for (auto& t : times) {
        for (double g : grid)
          if (uniform(rng, 0.0, 1.0) < 0.5) t.push_back(g);
        const auto own = poisson_times(rng, obs_span, 0.5 * spec.intensity);
        t.insert(t.end(), own.begin(), own.end());
        std::sort(t.begin(), t.end());
        t.erase(std::unique(t.begin(), t.end()), t.end());
      }
    }

    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t n = 0; n < spec.n_variates; ++n) {
      VariateSignal sig;
      switch (spec.family) {
        case SignalFamily::SinusoidMixture:
          for (std::size_t c = 0; c < spec.components; ++c) {
            sig.amp.push_back(uniform(rng, spec.amp_min, spec.amp_max));
            sig.freq.push_back(spec.fixed_frequencies ? fixed_freq[n][c] : uniform(rng, spec.freq_min, spec.freq_max));
            sig.phase.push_back(uniform(rng, spec.phase_min, spec.phase_max));
          }
          break;
        case SignalFamily::DampedOscillation:
          sig.amp.push_back(uniform(rng, spec.amp_min, spec.amp_max));
          sig.freq.push_back(spec.fixed_frequencies ? fixed_freq[n][0] : uniform(rng, spec.freq_min, spec.freq_max));
          sig.phase.push_back(uniform(rng, spec.phase_min, spec.phase_max));
          sig.decay = uniform(rng, 0.5, 2.0);
          break;
        case SignalFamily::PiecewiseTrend: {
          std::vector<double> cuts{uniform(rng, 0.0, spec.window), uniform(rng, 0.0, spec.window)};
          std::sort(cuts.begin(), cuts.end());
          sig.knots = {0.0, cuts[0], cuts[1], spec.window};
          sig.knots.erase(std::unique(sig.knots.begin(), sig.knots.end()), sig.knots.end());
          double level = uniform(rng, -spec.amp_max, spec.amp_max);
          sig.levels.push_back(level);
          for (std::size_t s = 1; s < sig.knots.size(); ++s) {
            level += uniform(rng, -2.0, 2.0) * spec.amp_max * (sig.knots[s] - sig.knots[s - 1]);
            sig.levels.push_back(level);
          }
          break;
        }
      }
      auto& obs = sample.series[n].observations;
      for (double t : times[n]) {
        double v = sig(spec.family, t);
        if (spec.noise_std > 0.0) v += spec.noise_std * noise(rng);
        obs.push_back({t, v});
      }
      std::vector<double> qt;
      const double lo = obs.empty() ? obs_span : std::max(obs_span, obs.back().time);
      for (std::size_t j = 0; j < spec.queries_per_variate; ++j) {
        double q = uniform(rng, lo, spec.window);
        if (!(q > lo)) q = std::nextafter(lo, spec.window);
        qt.push_back(q);
      }
      std::sort(qt.begin(), qt.end());
      for (double q : qt) {
        double v = sig(spec.family, q);
        if (spec.noise_std > 0.0) v += spec.noise_std * noise(rng);
        sample.queries[n].push_back({q, v});
      }
    }
    if (sample.num_observations() > 0) return sample;
  }
  throw ValidationError("generate: sample " + std::to_string(index) + " has no observations after " +
                        std::to_string(kMaxRetries) + " attempts; raise intensity");
}

}  // namespace

std::size_t SynthSpec::total_samples() const {
  const std::size_t explicit_total = n_train + n_val + n_test;
  return explicit_total > 0 ? explicit_total : n_samples;
}

void validate(const SynthSpec& s) {
  auto fail = [](const std::string& m) { throw ValidationError("synth spec: " + m); };
  if (s.n_variates == 0) fail("n_variates must be >= 1");
  if (s.total_samples() == 0) fail("sample count must be >= 1");
  if (!(s.window > 0.0)) fail("window must be positive");
  if (!(s.intensity > 0.0)) fail("intensity must be positive");
  if (!(s.horizon > 0.0 && s.horizon < 1.0)) fail("horizon must lie in (0, 1)");
  if (s.family == SignalFamily::SinusoidMixture && s.components == 0) fail("components must be >= 1");
  if (s.amp_min > s.amp_max || s.freq_min > s.freq_max || s.phase_min > s.phase_max) fail("inverted range");
  if (s.noise_std < 0.0) fail("noise_std must be non-negative");
  if (s.queries_per_variate == 0) fail("queries_per_variate must be >= 1");
}

SynthSpec preset(const std::string& name) {
  SynthSpec s;
  if (name == "sinusoid-a") {
    s.n_variates = 5;
    s.n_train = 500;
    s.n_val = 150;
    s.n_test = 150;
    s.asynchrony = Asynchrony::Independent;
    s.family = SignalFamily::SinusoidMixture;
  } else if (name == "damped-b") {
    s.n_variates = 8;
    s.n_samples = 400;
    s.asynchrony = Asynchrony::Mixed;
    s.family = SignalFamily::DampedOscillation;
    s.freq_min = 1.0;
    s.freq_max = 3.0;
  } else if (name == "trend-c") {
    s.n_variates = 4;
    s.n_samples = 400;
    s.asynchrony = Asynchrony::SharedGrid;
    s.family = SignalFamily::PiecewiseTrend;
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  return s;
}

std::vector<std::string> preset_names() { return {"sinusoid-a", "damped-b", "trend-c"}; }

namespace {
const char* asynchrony_name(Asynchrony a) {
  switch (a) {
    case Asynchrony::SharedGrid: return "shared-grid";
    case Asynchrony::Mixed: return "mixed";
    default: return "independent";
  }
}
const char* family_name(SignalFamily f) {
  switch (f) {
    case SignalFamily::DampedOscillation: return "damped";
    case SignalFamily::PiecewiseTrend: return "trend";
    default: return "sinusoid";
  }
}
}  // namespace

std::string spec_to_json(const SynthSpec& s) {
  nlohmann::json j{{"n_variates", s.n_variates},       {"n_samples", s.n_samples},
                   {"n_train", s.n_train},             {"n_val", s.n_val},
                   {"n_test", s.n_test},               {"window", s.window},
                   {"intensity", s.intensity},         {"asynchrony", asynchrony_name(s.asynchrony)},
                   {"family", family_name(s.family)},  {"components", s.components},
                   {"amp_min", s.amp_min},             {"amp_max", s.amp_max},
                   {"freq_min", s.freq_min},           {"freq_max", s.freq_max},
                   {"phase_min", s.phase_min},         {"phase_max", s.phase_max},
                   {"fixed_frequencies", s.fixed_frequencies}, {"noise_std", s.noise_std},
                   {"horizon", s.horizon},             {"queries_per_variate", s.queries_per_variate},
                   {"seed", s.seed}};
  return j.dump(2);
}

SynthSpec spec_from_json(const std::string& text) {
  SynthSpec s;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.items()) {
      if (k == "n_variates") s.n_variates = v.get<std::size_t>();
      else if (k == "n_samples") s.n_samples = v.get<std::size_t>();
      else if (k == "n_train") s.n_train = v.get<std::size_t>();
      else if (k == "n_val") s.n_val = v.get<std::size_t>();
      else if (k == "n_test") s.n_test = v.get<std::size_t>();
      else if (k == "window") s.window = v.get<double>();
      else if (k == "intensity") s.intensity = v.get<double>();
      else if (k == "asynchrony") {
        const auto a = v.get<std::string>();
        if (a == "independent") s.asynchrony = Asynchrony::Independent;
        else if (a == "shared-grid") s.asynchrony = Asynchrony::SharedGrid;
        else if (a == "mixed") s.asynchrony = Asynchrony::Mixed;
        else throw ValidationError("synth spec: unknown asynchrony '" + a + "'");
      } else if (k == "family") {
        const auto f = v.get<std::string>();
        if (f == "sinusoid") s.family = SignalFamily::SinusoidMixture;
        else if (f == "damped") s.family = SignalFamily::DampedOscillation;
        else if (f == "trend") s.family = SignalFamily::PiecewiseTrend;
        else throw ValidationError("synth spec: unknown family '" + f + "'");
      } else if (k == "components") s.components = v.get<std::size_t>();
      else if (k == "amp_min") s.amp_min = v.get<double>();
      else if (k == "amp_max") s.amp_max = v.get<double>();
      else if (k == "freq_min") s.freq_min = v.get<double>();
      else if (k == "freq_max") s.freq_max = v.get<double>();
      else if (k == "phase_min") s.phase_min = v.get<double>();
      else if (k == "phase_max") s.phase_max = v.get<double>();
      else if (k == "fixed_frequencies") s.fixed_frequencies = v.get<bool>();
      else if (k == "noise_std") s.noise_std = v.get<double>();
      else if (k == "horizon") s.horizon = v.get<double>();
      else if (k == "queries_per_variate") s.queries_per_variate = v.get<std::size_t>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else throw ValidationError("synth spec: unknown key '" + k + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth spec: ") + e.what());
  }
  validate(s);
  return s;
}

std::vector<ImtsSample> generate(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(mix(spec.seed, kDatasetStream));
  std::vector<std::vector<double>> fixed_freq(spec.n_variates);
  for (auto& f : fixed_freq)
    for (std::size_t c = 0; c < std::max<std::size_t>(spec.components, 1); ++c) {
      f.push_back(uniform(rng, spec.freq_min, spec.freq_max));
    }
  std::vector<ImtsSample> out;
  const std::size_t n = spec.total_samples();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_one(spec, fixed_freq, i));
  return out;
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed, std::size_t n_train, std::size_t n_val,
                           std::size_t n_test) {
  if (n_train + n_val + n_test == 0) {
    n_train = n * 6 / 10;
    n_val = n * 2 / 10;
    n_test = n - n_train - n_val;
  }
  if (n_train + n_val + n_test != n) throw ValidationError("split sizes do not add up to the sample count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix(seed, kSplitStream));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

Dataset generate_dataset(const SynthSpec& spec) {
  auto samples = generate(spec);
  const SplitIndices idx = split_indices(samples.size(), spec.seed, spec.n_train, spec.n_val, spec.n_test);
  Dataset d;
  d.n_variates = spec.n_variates;
  for (std::size_t i : idx.train) d.train.push_back(samples[i]);
  for (std::size_t i : idx.val) d.val.push_back(samples[i]);
  for (std::size_t i : idx.test) d.test.push_back(samples[i]);
  return d;
}

}  // namespace kafnet
