#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "kafnet/datagen.hpp"
#include "kafnet/training.hpp"

using namespace kafnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result call(std::initializer_list<std::string> args) {
  std::vector<std::string> storage{"kafnet"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kafnet_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string at(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

std::vector<std::vector<double>> read_matrix(const std::string& path) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

// Small 2-variate dataset in which every split holds the same three series,
// so the best-validation checkpoint is also the best fit to the training set.
std::string overfit_dataset(const std::string& dir) {
  SynthSpec spec;
  spec.n_variates = 2;
  spec.n_samples = 3;
  spec.noise_std = 0.0;
  spec.intensity = 8.0;
  spec.queries_per_variate = 2;
  spec.seed = 11;
  Dataset d;
  d.n_variates = 2;
  d.train = generate(spec);
  d.val = d.train;
  d.test = d.train;
  return write_dataset(d, dir, spec_to_json(spec));
}

const std::initializer_list<std::string> kSmall{"--hidden", "8", "--heads", "2", "--rff", "8", "--blocks", "1",
                                                "--kernels", "4", "--channels", "4", "--time-embed", "5"};

Result call_small(std::initializer_list<std::string> args) {
  std::vector<std::string> all(args);
  all.insert(all.end(), kSmall.begin(), kSmall.end());
  std::vector<const char*> argv{"kafnet"};
  for (const auto& s : all) argv.push_back(s.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_CASE("gen writes a manifest and six csv files, deterministically") {
  const std::string a = scratch("gen_a"), b = scratch("gen_b");
  auto r = call({"gen", "--preset", "sinusoid-a", "--seed", "7", "--samples", "60", "--out", a});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("manifest.json") != std::string::npos);
  for (const char* f : {"train_observations.csv", "train_queries.csv", "val_observations.csv", "val_queries.csv",
                        "test_observations.csv", "test_queries.csv", "manifest.json", "gen_config.json"})
    CHECK(fs::exists(at(a, f)));
  REQUIRE(call({"gen", "--preset", "sinusoid-a", "--seed", "7", "--samples", "60", "--out", b}).code == 0);
  CHECK(read_file(at(a, "manifest.json")) == read_file(at(b, "manifest.json")));
  CHECK(read_dataset(at(a, "manifest.json")).train.size() == 36);
}

TEST_CASE("usage and validation failures exit 2") {
  const std::string dir = scratch("usage");
  auto r = call({"gen", "--variates", "0", "--out", dir});
  CHECK(r.code == 2);
  CHECK(r.err.find("n_variates") != std::string::npos);
  CHECK(call({"gen", "--preset", "nope", "--out", dir}).code == 2);
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"train", "--data", at(dir, "missing/manifest.json"), "--out", dir}).code == 2);
  CHECK(call({"train", "--out", dir}).code == 2);
  CHECK(call({"eval", "--checkpoint", at(dir, "none.json"), "--data", at(dir, "m.json"), "--out", dir}).code == 2);
  CHECK(call({"bench", "--heads", "3", "--out", dir}).code == 2);
  CHECK(call({"train", "--no-time-norm", "--per-variate-time-norm", "--out", dir}).code == 2);
}

TEST_CASE("config files reject unknown keys and flags override them") {
  const std::string dir = scratch("config");
  const std::string manifest = overfit_dataset(at(dir, "data"));
  write_file(at(dir, "bad.json"), R"({"data": "x", "colour": 1})");
  auto r = call({"train", "--config", at(dir, "bad.json")});
  CHECK(r.code == 2);
  CHECK(r.err.find("colour") != std::string::npos);
  write_file(at(dir, "bad_model.json"), R"({"model": {"hiden": 8}})");
  CHECK(call({"train", "--config", at(dir, "bad_model.json")}).code == 2);

  const std::string run_dir = at(dir, "run");
  write_file(at(dir, "good.json"), R"({"data": ")" + manifest + R"(", "run": ")" + run_dir +
                                       R"(", "seed": 4, "model": {"hidden": 8, "heads": 2, "rff_dim": 8, "blocks": 1,
                                       "max_epochs": 5, "learning_rate": 0.01}})");
  r = call({"train", "--config", at(dir, "good.json"), "--epochs", "2", "--quiet"});
  REQUIRE(r.code == 0);
  CHECK(line_count(read_file(at(run_dir, "history.csv"))) == 3);
  const std::string echoed = read_file(at(run_dir, "train_config.json"));
  CHECK(echoed.find("\"max_epochs\": 2") != std::string::npos);
  CHECK(echoed.find("\"seed\": 4") != std::string::npos);
  CHECK(echoed.find("\"learning_rate\": 0.01") != std::string::npos);
}

TEST_CASE("output directory defaults to the environment variable") {
  const std::string dir = scratch("env");
  ::setenv("KAFNET_OUT_DIR", dir.c_str(), 1);
  auto r = call({"gen", "--samples", "10"});
  ::unsetenv("KAFNET_OUT_DIR");
  CHECK(r.code == 0);
  CHECK(fs::exists(at(dir, "manifest.json")));
}

TEST_CASE("train, eval, predict and inspect on a tiny run") {
  const std::string dir = scratch("pipeline");
  const std::string manifest = overfit_dataset(at(dir, "data"));
  const std::string run = at(dir, "run");

  auto one = call_small({"train", "--data", manifest, "--out", at(dir, "one"), "--epochs", "1"});
  REQUIRE(one.code == 0);
  CHECK(line_count(read_file(at(at(dir, "one"), "history.csv"))) == 2);

  auto r = call_small({"train", "--data", manifest, "--out", run, "--epochs", "2000", "--patience", "2000", "--lr",
                       "0.01", "--quiet", "--no-timing"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(at(run, "checkpoint.json")));

  auto e1 = call({"eval", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--split", "train", "--out",
                  run});
  auto e2 = call({"eval", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--split", "train", "--out",
                  run});
  REQUIRE(e1.code == 0);
  CHECK(e1.out == e2.out);
  const Dataset data = read_dataset(manifest);
  const ModelParams params = load_checkpoint(at(run, "checkpoint.json"));
  CHECK(evaluate(params, data.train).mse < 1e-3);
  CHECK(read_file(at(run, "eval_train.csv")).find("split,mse,mae,count\ntrain,") == 0);

  // Predicting the split's own queries reproduces the evaluation internals.
  write_file(at(dir, "queries.csv"), queries_csv(data.train));
  r = call({"predict", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--split", "train", "--queries",
            at(dir, "queries.csv"), "--out", run});
  REQUIRE(r.code == 0);
  const auto internal = evaluate_points(params, data.train).predictions;
  std::istringstream in(read_file(at(run, "predictions.csv")));
  std::string line;
  std::getline(in, line);
  CHECK(line == "series_id,variate,time,prediction");
  std::vector<double> predicted;
  while (std::getline(in, line)) predicted.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  CHECK(predicted.size() == line_count(queries_csv(data.train)) - 1);
  REQUIRE(predicted.size() == internal.size());
  for (std::size_t i = 0; i < internal.size(); ++i) CHECK(predicted[i] == internal[i]);

  write_file(at(dir, "empty.csv"), "");
  CHECK(call({"predict", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--queries",
              at(dir, "empty.csv"), "--out", run})
            .code == 2);
  write_file(at(dir, "header_only.csv"), "series_id,variate,time\n");
  CHECK(call({"predict", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--queries",
              at(dir, "header_only.csv"), "--out", run})
            .code == 2);

  const std::string maps = at(dir, "maps");
  r = call({"inspect", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--sample", "1", "--out", maps});
  REQUIRE(r.code == 0);
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(maps))
    if (entry.path().filename().string().rfind("attention_", 0) == 0) {
      ++count;
      for (const auto& row : read_matrix(entry.path().string())) {
        double s = 0.0;
        for (double v : row) s += v;
        CHECK(std::abs(s - 1.0) < 1e-8);
        CHECK(row.size() == 2);
      }
    }
  CHECK(count == 2);  // B = 1, H = 2
  CHECK(call({"inspect", "--checkpoint", at(run, "checkpoint.json"), "--data", manifest, "--sample", "9", "--out",
              maps})
            .code == 2);
}

TEST_CASE("train is bitwise reproducible without timing") {
  const std::string dir = scratch("determinism");
  const std::string manifest = overfit_dataset(at(dir, "data"));
  for (const char* run : {"a", "b"})
    REQUIRE(call_small({"train", "--data", manifest, "--out", at(dir, run), "--epochs", "5", "--seed", "3", "--quiet",
                        "--no-timing"})
                .code == 0);
  CHECK(read_file(at(at(dir, "a"), "checkpoint.json")) == read_file(at(at(dir, "b"), "checkpoint.json")));
  CHECK(read_file(at(at(dir, "a"), "history.csv")) == read_file(at(at(dir, "b"), "history.csv")));
}

TEST_CASE("gradcheck reports every parameter and honours the tolerance") {
  const std::string dir = scratch("gradcheck");
  auto r = call_small({"gradcheck", "--out", dir});
  CHECK(r.code == 0);
  CHECK(r.out.find("gradcheck passed") != std::string::npos);
  ModelConfig c;
  c.hidden = 8;
  c.heads = 2;
  c.rff_dim = 8;
  c.blocks = 1;
  c.kernels = 4;
  c.preconv_channels = 4;
  c.time_embed_dim = 5;
  const std::string report = read_file(at(dir, "gradcheck.csv"));
  for (const auto& [name, t] : init_params(c).learnable) CHECK(report.find("\n" + name + ",") != std::string::npos);
  CHECK(line_count(report) == init_params(c).learnable.size() + 1);

  r = call_small({"gradcheck", "--out", dir, "--tol", "1e-12"});
  CHECK(r.code == 3);
  CHECK(r.out.find("gradcheck FAILED") != std::string::npos);
}

TEST_CASE("bench writes both sweeps with a constant parameter count") {
  const std::string dir = scratch("bench");
  auto r = call_small({"bench", "--lengths", "32,64", "--variates", "2,4", "--fixed-length", "64", "--fixed-variates",
                       "2", "--reps", "3", "--out", dir});
  REQUIRE(r.code == 0);
  std::istringstream in(read_file(at(dir, "bench.csv")));
  std::string line;
  std::getline(in, line);
  CHECK(line == "sweep,length,variates,median_seconds,ratio,parameters");
  std::set<std::string> counts;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    counts.insert(line.substr(line.rfind(',') + 1));
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(counts.size() == 1);
  CHECK(fs::exists(at(dir, "bench_config.json")));
}
