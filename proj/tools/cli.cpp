#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#ifdef __GLIBC__
#include <malloc.h>
#endif
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kafnet/datagen.hpp"
#include "kafnet/diagnostics.hpp"
#include "kafnet/error.hpp"
#include "kafnet/training.hpp"

namespace kafnet::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string default_out_dir() {
  const char* env = std::getenv("KAFNET_OUT_DIR");
  return env && *env ? env : "runs";
}

std::string ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void echo_config(const std::string& dir, const std::string& command, const json& config) {
  write_file(join(dir, command + "_config.json"), config.dump(2) + "\n");
}

// ---- run configuration ----------------------------------------------------------

struct RunConfig {
  std::string data;
  std::string out;
  TrainConfig train;
};

json model_json(const TrainConfig& t) {
  json m = json::parse(config_to_json(t.model));
  m["learning_rate"] = t.learning_rate;
  m["batch_size"] = t.batch_size;
  m["max_epochs"] = t.max_epochs;
  m["patience"] = t.patience;
  m["clip_norm"] = t.clip_norm;
  m["record_time"] = t.record_time;
  return m;
}

json to_json(const RunConfig& rc) {
  return json{{"data", rc.data}, {"model", model_json(rc.train)}, {"run", rc.out}, {"seed", rc.train.seed}};
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig rc;
  rc.out = default_out_dir();
  try {
    const json doc = json::parse(text);
    if (!doc.is_object()) throw ValidationError(source + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
      if (key == "data") rc.data = value.get<std::string>();
      else if (key == "run") rc.out = value.get<std::string>();
      else if (key == "seed") rc.train.seed = value.get<std::uint64_t>();
      else if (key == "model") {
        json shape = json::object();
        for (const auto& [k, v] : value.items()) {
          if (k == "learning_rate") rc.train.learning_rate = v.get<double>();
          else if (k == "batch_size") rc.train.batch_size = v.get<std::size_t>();
          else if (k == "max_epochs") rc.train.max_epochs = v.get<std::size_t>();
          else if (k == "patience") rc.train.patience = v.get<std::size_t>();
          else if (k == "clip_norm") rc.train.clip_norm = v.get<double>();
          else if (k == "record_time") rc.train.record_time = v.get<bool>();
          else shape[k] = v;
        }
        rc.train.model = config_from_json(shape.dump());
      } else {
        throw ValidationError(source + ": unknown key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return rc;
}

// Flags that override the config file; unset flags leave it alone.
struct Overrides {
  std::string config_path;
  std::optional<std::string> data, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::optional<std::size_t> epochs, patience, batch, kernels, channels, time_embed, hidden, heads, rff, blocks;
  bool no_preconv = false, no_gate = false, softmax = false, no_time_norm = false, per_variate = false;
  bool no_timing = false;

  void add_to(CLI::App* app, bool training_flags) {
    app->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--data", data, "dataset manifest");
    app->add_option("--out", out, "output directory (default $KAFNET_OUT_DIR or ./runs)");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--kernels", kernels, "Gaussian kernels K");
    app->add_option("--channels", channels, "pre-convolution channels C");
    app->add_option("--time-embed", time_embed, "time embedding width");
    app->add_option("--hidden", hidden, "hidden width d");
    app->add_option("--heads", heads, "attention heads H");
    app->add_option("--rff", rff, "random features R");
    app->add_option("--blocks", blocks, "attention blocks B");
    app->add_flag("--no-preconv", no_preconv, "skip the pre-convolution");
    app->add_flag("--no-tka-gate", no_gate, "drop the empty-variate gate");
    app->add_flag("--softmax-attention", softmax, "exact softmax attention instead of random features");
    app->add_flag("--no-time-norm", no_time_norm, "feed raw timestamps to the kernels");
    app->add_flag("--per-variate-time-norm", per_variate, "normalize times per variate");
    if (training_flags) {
      app->add_option("--lr", lr, "learning rate");
      app->add_option("--epochs", epochs, "maximum epochs");
      app->add_option("--patience", patience, "early-stopping patience");
      app->add_option("--batch-size", batch, "samples per optimizer step");
      app->add_flag("--no-timing", no_timing, "write 0 in the history seconds column");
    }
  }

  RunConfig resolve() const {
    RunConfig rc;
    rc.out = default_out_dir();
    if (!config_path.empty()) rc = parse_run_config(read_file(config_path), config_path);
    if (data) rc.data = *data;
    if (out) rc.out = *out;
    if (seed) rc.train.seed = *seed;
    if (lr) rc.train.learning_rate = *lr;
    if (epochs) rc.train.max_epochs = *epochs;
    if (patience) rc.train.patience = *patience;
    if (batch) rc.train.batch_size = *batch;
    ModelConfig& m = rc.train.model;
    if (kernels) m.kernels = *kernels;
    if (channels) m.preconv_channels = *channels;
    if (time_embed) m.time_embed_dim = *time_embed;
    if (hidden) m.hidden = *hidden;
    if (heads) m.heads = *heads;
    if (rff) m.rff_dim = *rff;
    if (blocks) m.blocks = *blocks;
    if (no_preconv) m.use_preconv = false;
    if (no_gate) m.use_gate = false;
    if (softmax) m.attention = AttentionKind::Softmax;
    if (no_time_norm && per_variate) throw ValidationError("--no-time-norm and --per-variate-time-norm conflict");
    if (no_time_norm) m.time_norm = TimeNorm::None;
    if (per_variate) m.time_norm = TimeNorm::PerVariate;
    if (no_timing) rc.train.record_time = false;
    validate(rc.train);
    return rc;
  }
};

const std::vector<ImtsSample>& pick_split(const Dataset& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "val") return d.val;
  if (split == "test") return d.test;
  throw ValidationError("unknown split '" + split + "' (train, val, test)");
}

std::string require(const std::optional<std::string>& v, const std::string& what) {
  if (!v || v->empty()) throw ValidationError(what + " is required");
  return *v;
}

// ---- commands -------------------------------------------------------------------

struct GenArgs {
  std::string preset = "sinusoid-a";
  std::string spec_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> variates, samples;
  std::optional<std::string> out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  SynthSpec spec = a.spec_path.empty() ? preset(a.preset) : spec_from_json(read_file(a.spec_path));
  if (a.seed) spec.seed = *a.seed;
  if (a.variates) spec.n_variates = *a.variates;
  if (a.samples) {
    spec.n_samples = *a.samples;
    spec.n_train = spec.n_val = spec.n_test = 0;
  }
  validate(spec);
  const std::string dir = ensure_dir(a.out.value_or(default_out_dir()));
  const std::string spec_json = spec_to_json(spec);
  const std::string manifest = write_dataset(generate_dataset(spec), dir, spec_json);
  echo_config(dir, "gen", json::parse(spec_json));
  out << manifest << "\n";
  return 0;
}

int cmd_train(const Overrides& o, bool quiet, std::ostream& out) {
  RunConfig rc = o.resolve();
  if (rc.data.empty()) throw ValidationError("--data (or config 'data') is required");
  const Dataset data = read_dataset(rc.data);
  const std::string dir = ensure_dir(rc.out);
  echo_config(dir, "train", to_json(rc));
  for (const auto& w : off_grid_warnings(rc.train)) out << "warning: " << w << "\n";

  const Metrics baseline = mean_baseline(data.train, data.val);
  out << "parameters " << analytic_parameter_count(rc.train.model) << ", baseline val mse " << num(baseline.mse) << "\n";
  TrainResult result = train(data.train, data.val, rc.train, [&](const EpochRecord& r) {
    if (!quiet) out << "epoch " << r.epoch << " loss " << num(r.train_loss) << " val_mse " << num(r.val_mse) << "\n";
  });
  write_file(join(dir, "history.csv"), history_csv(result.history));
  if (result.best_epoch > 0) save_checkpoint(result.best, join(dir, "checkpoint.json"));
  if (result.diverged) {
    out << result.message << "\n";
    return 3;
  }
  out << "best epoch " << result.best_epoch << " val_mse " << num(result.best_val_mse) << " ("
      << num(result.best_val_mse / baseline.mse) << "x baseline)\n";
  out << join(dir, "checkpoint.json") << "\n";
  return 0;
}

int cmd_eval(const std::optional<std::string>& checkpoint, const std::optional<std::string>& data_path,
             const std::string& split, const std::optional<std::string>& out_dir, std::ostream& out) {
  const ModelParams params = load_checkpoint(require(checkpoint, "--checkpoint"));
  const Dataset data = read_dataset(require(data_path, "--data"));
  const Metrics m = evaluate(params, pick_split(data, split));
  const std::string dir = ensure_dir(out_dir.value_or(default_out_dir()));
  echo_config(dir, "eval", json{{"checkpoint", *checkpoint}, {"data", *data_path}, {"split", split}});
  const std::string row = split + "," + num(m.mse) + "," + num(m.mae) + "," + std::to_string(m.count) + "\n";
  write_file(join(dir, "eval_" + split + ".csv"), "split,mse,mae,count\n" + row);
  out << "split " << split << " mse " << num(m.mse) << " mae " << num(m.mae) << " count " << m.count << "\n";
  return 0;
}

int cmd_predict(const std::optional<std::string>& checkpoint, const std::optional<std::string>& data_path,
                const std::string& split, const std::optional<std::string>& queries_path,
                const std::optional<std::string>& out_dir, std::ostream& out) {
  const ModelParams params = load_checkpoint(require(checkpoint, "--checkpoint"));
  const Dataset data = read_dataset(require(data_path, "--data"));
  std::vector<ImtsSample> samples = pick_split(data, split);
  const std::string qpath = require(queries_path, "--queries");
  attach_queries(samples, read_file(qpath), qpath);
  std::size_t total = 0;
  for (const auto& s : samples) total += s.num_queries();
  if (total == 0) throw ValidationError(qpath + ": no queries");

  std::string csv = "series_id,variate,time,prediction\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].num_queries() == 0) continue;
    const auto pred = predict(params, samples[i]);
    for (std::size_t n = 0; n < samples[i].num_variates(); ++n)
      for (std::size_t j = 0; j < pred[n].size(); ++j)
        csv += std::to_string(i) + "," + std::to_string(n + 1) + "," + num(samples[i].queries[n][j].time) + "," +
               num(pred[n][j]) + "\n";
  }
  const std::string dir = ensure_dir(out_dir.value_or(default_out_dir()));
  echo_config(dir, "predict",
              json{{"checkpoint", *checkpoint}, {"data", *data_path}, {"split", split}, {"queries", qpath}});
  write_file(join(dir, "predictions.csv"), csv);
  out << total << " predictions -> " << join(dir, "predictions.csv") << "\n";
  return 0;
}

int cmd_gradcheck(const Overrides& o, double tol, double h, std::size_t max_entries, std::ostream& out) {
  const RunConfig rc = o.resolve();
  ModelParams params = init_params(rc.train.model);
  jitter_biases(params, rc.train.seed);
  const auto report = model_grad_check(params, toy_sample(), h, tol, max_entries);
  const std::string dir = ensure_dir(rc.out);
  json cfg = to_json(rc);
  cfg["tolerance"] = tol;
  cfg["step"] = h;
  echo_config(dir, "gradcheck", cfg);
  std::string csv = "parameter,entries,max_rel_error,max_abs_error,pass\n";
  for (const auto& e : report.entries) {
    csv += e.name + "," + std::to_string(e.checked) + "," + num(e.max_rel_error) + "," + num(e.max_abs_error) + "," +
           (e.pass ? "1" : "0") + "\n";
    char line[160];
    std::snprintf(line, sizeof line, "%-28s %6zu  rel %.3e  abs %.3e  %s\n", e.name.c_str(), e.checked,
                  e.max_rel_error, e.max_abs_error, e.pass ? "ok" : "FAIL");
    out << line;
  }
  write_file(join(dir, "gradcheck.csv"), csv);
  out << (report.pass ? "gradcheck passed" : "gradcheck FAILED") << " (" << report.entries.size()
      << " parameter groups, tol " << tol << ")\n";
  return report.pass ? 0 : 3;
}

int cmd_bench(const Overrides& o, const std::vector<std::size_t>& lengths, const std::vector<std::size_t>& variates,
              std::size_t fixed_length, std::size_t fixed_variates, std::size_t reps, std::ostream& out) {
  const RunConfig rc = o.resolve();
  if (reps == 0) throw ValidationError("--reps must be >= 1");
#ifdef __GLIBC__
  // Large im2col buffers otherwise go through fresh mmap()s on every pass and
  // the page faults, not the arithmetic, dominate timings past ~4 MB.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  const ModelParams params = init_params(rc.train.model);
  const std::size_t count = params.parameter_count();

  std::string csv = "sweep,length,variates,median_seconds,ratio,parameters\n";
  auto sweep = [&](const std::string& name, const std::vector<std::size_t>& ls, const std::vector<std::size_t>& ns) {
    double prev = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      if (ns[i] == 0 || ls[i] < ns[i]) throw ValidationError("bench: need length >= variates >= 1");
      const double t = median_forward_seconds(params, bench_sample(ls[i], ns[i], rc.train.seed), reps);
      const double ratio = i == 0 ? 0.0 : t / prev;
      prev = t;
      csv += name + "," + std::to_string(ls[i]) + "," + std::to_string(ns[i]) + "," + num(t) + "," + num(ratio) + "," +
             std::to_string(count) + "\n";
      out << name << " L=" << ls[i] << " N=" << ns[i] << " median " << num(t) << " s";
      if (i > 0) out << " ratio " << num(ratio);
      out << "\n";
    }
  };
  sweep("length", lengths, std::vector<std::size_t>(lengths.size(), fixed_variates));
  sweep("variates", std::vector<std::size_t>(variates.size(), fixed_length), variates);

  const std::string dir = ensure_dir(rc.out);
  json cfg = to_json(rc);
  cfg["lengths"] = lengths;
  cfg["variates"] = variates;
  cfg["fixed_length"] = fixed_length;
  cfg["fixed_variates"] = fixed_variates;
  cfg["reps"] = reps;
  echo_config(dir, "bench", cfg);
  write_file(join(dir, "bench.csv"), csv);
  return 0;
}

int cmd_inspect(const std::optional<std::string>& checkpoint, const std::optional<std::string>& data_path,
                const std::string& split, std::size_t index, const std::optional<std::string>& out_dir,
                std::ostream& out) {
  const ModelParams params = load_checkpoint(require(checkpoint, "--checkpoint"));
  const Dataset data = read_dataset(require(data_path, "--data"));
  const auto& samples = pick_split(data, split);
  if (index >= samples.size())
    throw ValidationError("--sample " + std::to_string(index) + " out of range (" + split + " has " +
                          std::to_string(samples.size()) + ")");
  const AttentionMaps maps = attention_maps(params, samples[index]);
  const std::string dir = ensure_dir(out_dir.value_or(default_out_dir()));
  echo_config(dir, "inspect",
              json{{"checkpoint", *checkpoint}, {"data", *data_path}, {"split", split}, {"sample", index}});
  for (std::size_t m = 0; m < maps.maps.size(); ++m) {
    const Tensor& a = maps.maps[m];
    std::string csv;
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) csv += (j ? "," : "") + num(a(i, j));
      csv += "\n";
    }
    const std::string name = "attention_b" + std::to_string(maps.block[m]) + "_h" + std::to_string(maps.head[m]) + ".csv";
    write_file(join(dir, name), csv);
  }
  out << maps.maps.size() << " maps written to " << dir << ", max output mismatch " << num(maps.max_output_mismatch)
      << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"KAFNet forecaster for irregular multivariate time series"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--preset", gen.preset, "preset name (sinusoid-a, damped-b, trend-c)");
  gen_cmd->add_option("--spec", gen.spec_path, "JSON generator spec")->check(CLI::ExistingFile);
  gen_cmd->add_option("--seed", gen.seed, "dataset seed");
  gen_cmd->add_option("--variates", gen.variates, "number of variates");
  gen_cmd->add_option("--samples", gen.samples, "total samples (60/20/20 split)");
  gen_cmd->add_option("--out", gen.out, "output directory");

  Overrides train_o;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_o.add_to(train_cmd, true);
  train_cmd->add_flag("--quiet", quiet, "no per-epoch lines");

  std::optional<std::string> checkpoint, data, out_dir, queries;
  std::string split = "val";
  std::size_t sample_index = 0;
  auto* eval_cmd = app.add_subcommand("eval", "pooled MSE/MAE of a checkpoint on a split");
  auto* predict_cmd = app.add_subcommand("predict", "predict query times for a split's series");
  auto* inspect_cmd = app.add_subcommand("inspect", "dump per-block, per-head attention maps");
  for (auto* c : {eval_cmd, predict_cmd, inspect_cmd}) {
    c->add_option("--checkpoint", checkpoint, "checkpoint file");
    c->add_option("--data", data, "dataset manifest");
    c->add_option("--split", split, "train, val or test");
    c->add_option("--out", out_dir, "output directory");
  }
  predict_cmd->add_option("--queries", queries, "query CSV: series_id,variate,time");
  inspect_cmd->add_option("--sample", sample_index, "sample index within the split");

  Overrides grad_o;
  double tol = 1e-4, step = 1e-4;
  std::size_t max_entries = 0;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter on a toy sample");
  grad_o.add_to(grad_cmd, false);
  grad_cmd->add_option("--tol", tol, "relative tolerance");
  grad_cmd->add_option("--step", step, "central-difference step");
  grad_cmd->add_option("--max-entries", max_entries, "entries checked per tensor (0 = all)");

  Overrides bench_o;
  std::vector<std::size_t> lengths{256, 512, 1024, 2048}, variate_list{8, 16, 32, 64};
  std::size_t fixed_length = 1024, fixed_variates = 8, reps = 20;
  auto* bench_cmd = app.add_subcommand("bench", "forward wall time against grid length and variate count");
  bench_o.add_to(bench_cmd, false);
  bench_cmd->add_option("--lengths", lengths, "grid lengths for the L sweep")->delimiter(',');
  bench_cmd->add_option("--variates", variate_list, "variate counts for the N sweep")->delimiter(',');
  bench_cmd->add_option("--fixed-length", fixed_length, "grid length during the N sweep");
  bench_cmd->add_option("--fixed-variates", fixed_variates, "variate count during the L sweep");
  bench_cmd->add_option("--reps", reps, "repetitions per point (median reported)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (train_cmd->parsed()) return cmd_train(train_o, quiet, out);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint, data, split, out_dir, out);
    if (predict_cmd->parsed()) return cmd_predict(checkpoint, data, split, queries, out_dir, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_o, tol, step, max_entries, out);
    if (bench_cmd->parsed())
      return cmd_bench(bench_o, lengths, variate_list, fixed_length, fixed_variates, reps, out);
    if (inspect_cmd->parsed()) return cmd_inspect(checkpoint, data, split, sample_index, out_dir, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace kafnet::cli
