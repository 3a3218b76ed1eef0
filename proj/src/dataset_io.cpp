#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "kafnet/datagen.hpp"
#include "kafnet/error.hpp"

namespace kafnet {

namespace fs = std::filesystem;

namespace {

const char* kObsHeader = "series_id,variate,time,value";
const char* kQueryHeader = "series_id,variate,time";
const char* kQueryHeaderTarget = "series_id,variate,time,target";

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void fail_at(const std::string& source, std::size_t line, const std::string& msg) {
  throw ValidationError(source + ":" + std::to_string(line) + ": " + msg);
}

std::size_t parse_index(const std::string& s, const std::string& source, std::size_t line, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    fail_at(source, line, std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& s, const std::string& source, std::size_t line, const char* what) {
  // strtod rather than from_chars: libstdc++ 11 lacks floating from_chars on
  // some targets. The "C" locale is in effect for the process.
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    fail_at(source, line, std::string("bad ") + what + " '" + s + "'");
  }
  return v;
}

// Calls row(line_no, fields) for each data line; returns whether the header
// carried the optional fourth column.
template <class Row>
bool for_each_row(const std::string& text, const std::string& source, const std::vector<const char*>& headers, Row row) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool extended = false;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      bool ok = false;
      for (std::size_t h = 0; h < headers.size(); ++h)
        if (line == headers[h]) {
          ok = true;
          extended = h > 0;
        }
      if (!ok) fail_at(source, line_no, "unexpected header '" + line + "'");
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    row(line_no, split_fields(line), extended);
  }
  // A zero-byte file carries no rows; anything else must start with a header.
  if (!have_header && !text.empty()) fail_at(source, 1, "missing header");
  return extended;
}

ImtsSample& sample_at(std::map<std::size_t, ImtsSample>& samples, std::size_t id, std::size_t n_variates) {
  auto [it, inserted] = samples.try_emplace(id);
  if (inserted) {
    it->second.series.resize(n_variates);
    it->second.queries.resize(n_variates);
  }
  return it->second;
}

std::size_t parse_variate(const std::string& s, std::size_t n_variates, const std::string& source, std::size_t line) {
  const std::size_t v = parse_index(s, source, line, "variate");
  if (v < 1 || v > n_variates) {
    fail_at(source, line, "variate " + s + " outside [1, " + std::to_string(n_variates) + "]");
  }
  return v - 1;
}

void read_queries_into(std::map<std::size_t, ImtsSample>& samples, const std::string& text, std::size_t n_variates,
                       const std::string& source, bool create) {
  for_each_row(text, source, {kQueryHeader, kQueryHeaderTarget},
               [&](std::size_t line, const std::vector<std::string>& f, bool with_target) {
                 if (f.size() != (with_target ? 4u : 3u)) fail_at(source, line, "wrong field count");
                 const std::size_t id = parse_index(f[0], source, line, "series_id");
                 const std::size_t v = parse_variate(f[1], n_variates, source, line);
                 if (!create && !samples.count(id)) fail_at(source, line, "unknown series_id " + f[0]);
                 Query q;
                 q.time = parse_real(f[2], source, line, "time");
                 if (with_target && !f[3].empty()) q.target = parse_real(f[3], source, line, "target");
                 ImtsSample& s = sample_at(samples, id, n_variates);
                 const auto& obs = s.series[v].observations;
                 if (!obs.empty() && !(q.time > obs.back().time)) {
                   fail_at(source, line, "query time does not exceed the last observation");
                 }
                 s.queries[v].push_back(q);
               });
}

}  // namespace

std::string observations_csv(const std::vector<ImtsSample>& samples) {
  std::string out = std::string(kObsHeader) + "\n";
  for (std::size_t id = 0; id < samples.size(); ++id)
    for (std::size_t n = 0; n < samples[id].series.size(); ++n)
      for (const Observation& o : samples[id].series[n].observations) {
        out += std::to_string(id) + "," + std::to_string(n + 1) + "," + fmt_double(o.time) + "," +
               fmt_double(o.value) + "\n";
      }
  return out;
}

std::string queries_csv(const std::vector<ImtsSample>& samples) {
  std::string out = std::string(kQueryHeaderTarget) + "\n";
  for (std::size_t id = 0; id < samples.size(); ++id)
    for (std::size_t n = 0; n < samples[id].queries.size(); ++n)
      for (const Query& q : samples[id].queries[n]) {
        out += std::to_string(id) + "," + std::to_string(n + 1) + "," + fmt_double(q.time) + "," +
               (q.target ? fmt_double(*q.target) : std::string()) + "\n";
      }
  return out;
}

std::vector<ImtsSample> parse_split(const std::string& obs_text, const std::string& query_text, std::size_t n_variates,
                                    const std::string& obs_source, const std::string& query_source) {
  if (n_variates == 0) throw ValidationError("parse_split: n_variates must be >= 1");
  std::map<std::size_t, ImtsSample> samples;
  for_each_row(obs_text, obs_source, {kObsHeader},
               [&](std::size_t line, const std::vector<std::string>& f, bool) {
                 if (f.size() != 4) fail_at(obs_source, line, "wrong field count");
                 const std::size_t id = parse_index(f[0], obs_source, line, "series_id");
                 const std::size_t v = parse_variate(f[1], n_variates, obs_source, line);
                 const double t = parse_real(f[2], obs_source, line, "time");
                 const double x = parse_real(f[3], obs_source, line, "value");
                 auto& obs = sample_at(samples, id, n_variates).series[v].observations;
                 if (!obs.empty() && !(t > obs.back().time)) {
                   fail_at(obs_source, line, "times for series " + f[0] + " variate " + f[1] + " not strictly increasing");
                 }
                 obs.push_back({t, x});
               });
  read_queries_into(samples, query_text, n_variates, query_source, true);

  std::vector<ImtsSample> out;
  out.reserve(samples.size());
  std::size_t expected = 0;
  for (auto& [id, s] : samples) {
    if (id != expected) throw ValidationError(obs_source + ": series ids are not dense (missing " + std::to_string(expected) + ")");
    out.push_back(std::move(s));
    ++expected;
  }
  return out;
}

void attach_queries(std::vector<ImtsSample>& samples, const std::string& query_text, const std::string& source) {
  if (samples.empty()) throw ValidationError(source + ": no samples to attach queries to");
  const std::size_t n_variates = samples.front().series.size();
  std::map<std::size_t, ImtsSample> indexed;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ImtsSample s = samples[i];
    s.queries.assign(n_variates, {});
    indexed.emplace(i, std::move(s));
  }
  read_queries_into(indexed, query_text, n_variates, source, false);
  for (auto& [id, s] : indexed) samples[id] = std::move(s);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << bytes;
}

std::string write_dataset(const Dataset& data, const std::string& dir, const std::string& spec_json) {
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  const std::pair<const char*, const std::vector<ImtsSample>*> splits[] = {
      {"train", &data.train}, {"val", &data.val}, {"test", &data.test}};
  for (const auto& [name, samples] : splits) {
    const std::string obs = observations_csv(*samples);
    const std::string qry = queries_csv(*samples);
    const std::string obs_name = std::string(name) + "_observations.csv";
    const std::string qry_name = std::string(name) + "_queries.csv";
    write_file((fs::path(dir) / obs_name).string(), obs);
    write_file((fs::path(dir) / qry_name).string(), qry);
    files[name] = {{"observations", {{"path", obs_name}, {"sha256", sha256_hex(obs)}}},
                   {"queries", {{"path", qry_name}, {"sha256", sha256_hex(qry)}}},
                   {"samples", samples->size()}};
  }
  nlohmann::json manifest{{"format", "kafnet-dataset"},
                          {"version", 1},
                          {"n_variates", data.n_variates},
                          {"spec", nlohmann::json::parse(spec_json)},
                          {"files", files}};
  const std::string path = (fs::path(dir) / "manifest.json").string();
  write_file(path, manifest.dump(2) + "\n");
  return path;
}

Dataset read_dataset(const std::string& manifest_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(manifest_path + ": " + e.what());
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  Dataset d;
  try {
    if (manifest.at("format").get<std::string>() != "kafnet-dataset") {
      throw ValidationError(manifest_path + ": not a dataset manifest");
    }
    d.n_variates = manifest.at("n_variates").get<std::size_t>();
    auto load = [&](const char* split) {
      const auto& entry = manifest.at("files").at(split);
      auto read_checked = [&](const nlohmann::json& f) {
        const std::string path = (base / f.at("path").get<std::string>()).string();
        std::string bytes = read_file(path);
        if (sha256_hex(bytes) != f.at("sha256").get<std::string>()) {
          throw ValidationError(path + ": checksum mismatch");
        }
        return std::make_pair(path, std::move(bytes));
      };
      auto [obs_path, obs] = read_checked(entry.at("observations"));
      auto [qry_path, qry] = read_checked(entry.at("queries"));
      return parse_split(obs, qry, d.n_variates, obs_path, qry_path);
    };
    d.train = load("train");
    d.val = load("val");
    d.test = load("test");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(manifest_path + ": " + e.what());
  }
  return d;
}

}  // namespace kafnet
