#pragma once

// Seeded synthetic IMTS generation and the CSV/manifest dataset format.
//
// Observation CSV: series_id,variate,time,value
// Query CSV:       series_id,variate,time[,target]
// Variates are 1-based in files and 0-based in memory.

#include <cstdint>
#include <string>
#include <vector>

#include "kafnet/imts.hpp"

namespace kafnet {

enum class Asynchrony { Independent, SharedGrid, Mixed };
enum class SignalFamily { SinusoidMixture, DampedOscillation, PiecewiseTrend };

struct SynthSpec {
  std::size_t n_variates = 5;
  std::size_t n_samples = 800;
  // Explicit split sizes; all zero means 60/20/20 of n_samples.
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  double window = 1.0;
  double intensity = 12.0;  // mean observations per variate
  Asynchrony asynchrony = Asynchrony::Independent;
  SignalFamily family = SignalFamily::SinusoidMixture;
  std::size_t components = 2;
  double amp_min = 0.5, amp_max = 1.0;
  double freq_min = 0.5, freq_max = 1.5;  // cycles per unit time
  double phase_min = 0.0, phase_max = 6.283185307179586;
  // Frequencies drawn once per variate (shared by every sample) rather than
  // per sample.
  bool fixed_frequencies = true;
  double noise_std = 0.05;
  double horizon = 0.2;  // trailing fraction of the window reserved for queries
  std::size_t queries_per_variate = 3;
  std::uint64_t seed = 0;

  std::size_t total_samples() const;
};

void validate(const SynthSpec& spec);

// Named presets: "sinusoid-a", "damped-b", "trend-c".
SynthSpec preset(const std::string& name);
std::vector<std::string> preset_names();

std::string spec_to_json(const SynthSpec& spec);
SynthSpec spec_from_json(const std::string& text);

// total_samples() samples; sample i depends only on (seed, i).
std::vector<ImtsSample> generate(const SynthSpec& spec);

struct Dataset {
  std::size_t n_variates = 0;
  std::vector<ImtsSample> train, val, test;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Deterministic function of (seed, n, sizes); sizes of zero mean 60/20/20.
SplitIndices split_indices(std::size_t n, std::uint64_t seed, std::size_t n_train = 0, std::size_t n_val = 0,
                           std::size_t n_test = 0);

Dataset generate_dataset(const SynthSpec& spec);

// ---- CSV ----------------------------------------------------------------------

std::string observations_csv(const std::vector<ImtsSample>& samples);
std::string queries_csv(const std::vector<ImtsSample>& samples);

// Parses observation and query CSV text into samples indexed by series_id
// (ids must be dense from 0). Errors carry "<source>:<line>: ".
std::vector<ImtsSample> parse_split(const std::string& obs_text, const std::string& query_text, std::size_t n_variates,
                                    const std::string& obs_source = "observations",
                                    const std::string& query_source = "queries");

// Query-only CSV attached to existing samples by series_id (used by predict).
void attach_queries(std::vector<ImtsSample>& samples, const std::string& query_text, const std::string& source);

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

// Writes train/val/test observation and query CSVs plus manifest.json into
// dir; returns the manifest path.
std::string write_dataset(const Dataset& data, const std::string& dir, const std::string& spec_json = "{}");

// Reads a manifest, verifying every file checksum.
Dataset read_dataset(const std::string& manifest_path);

}  // namespace kafnet
