#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kafnet/error.hpp"
#include "kafnet/model.hpp"

namespace kafnet {

using nlohmann::json;

namespace {

const char* attention_name(AttentionKind k) { return k == AttentionKind::Softmax ? "softmax" : "rff"; }

const char* time_norm_name(TimeNorm t) {
  switch (t) {
    case TimeNorm::PerVariate: return "per_variate";
    case TimeNorm::None: return "none";
    default: return "global";
  }
}

json config_json(const ModelConfig& c) {
  return json{{"kernels", c.kernels},
              {"preconv_channels", c.preconv_channels},
              {"time_embed_dim", c.time_embed_dim},
              {"hidden", c.hidden},
              {"heads", c.heads},
              {"rff_dim", c.rff_dim},
              {"blocks", c.blocks},
              {"init_seed", c.init_seed},
              {"rff_seed", c.rff_seed},
              {"use_preconv", c.use_preconv},
              {"use_gate", c.use_gate},
              {"attention", attention_name(c.attention)},
              {"time_norm", time_norm_name(c.time_norm)}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "kernels") c.kernels = value.get<std::size_t>();
    else if (key == "preconv_channels") c.preconv_channels = value.get<std::size_t>();
    else if (key == "time_embed_dim") c.time_embed_dim = value.get<std::size_t>();
    else if (key == "hidden") c.hidden = value.get<std::size_t>();
    else if (key == "heads") c.heads = value.get<std::size_t>();
    else if (key == "rff_dim") c.rff_dim = value.get<std::size_t>();
    else if (key == "blocks") c.blocks = value.get<std::size_t>();
    else if (key == "init_seed") c.init_seed = value.get<std::uint64_t>();
    else if (key == "rff_seed") c.rff_seed = value.get<std::uint64_t>();
    else if (key == "use_preconv") c.use_preconv = value.get<bool>();
    else if (key == "use_gate") c.use_gate = value.get<bool>();
    else if (key == "attention") {
      const auto s = value.get<std::string>();
      if (s == "rff") c.attention = AttentionKind::RandomFeature;
      else if (s == "softmax") c.attention = AttentionKind::Softmax;
      else throw ValidationError("model config: unknown attention '" + s + "'");
    } else if (key == "time_norm") {
      const auto s = value.get<std::string>();
      if (s == "global") c.time_norm = TimeNorm::Global;
      else if (s == "per_variate") c.time_norm = TimeNorm::PerVariate;
      else if (s == "none") c.time_norm = TimeNorm::None;
      else throw ValidationError("model config: unknown time_norm '" + s + "'");
    } else {
      throw ValidationError("model config: unknown key '" + key + "'");
    }
  }
  validate(c);
  return c;
}

json tensors_json(const ad::ParamMap& m) {
  json out = json::object();
  for (const auto& [name, t] : m) out[name] = json{{"shape", t.shape()}, {"values", t.storage()}};
  return out;
}

ad::ParamMap tensors_from(const json& j) {
  ad::ParamMap out;
  for (const auto& [name, entry] : j.items()) {
    out.emplace(name, Tensor(entry.at("shape").get<Shape>(), entry.at("values").get<std::vector<double>>()));
  }
  return out;
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(2); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

std::string serialize(const ModelParams& params) {
  json doc{{"format", "kafnet-checkpoint"},
           {"version", 1},
           {"config", config_json(params.config)},
           {"rff_seed", params.config.rff_seed},
           {"parameters", tensors_json(params.learnable)},
           {"buffers", tensors_json(params.buffers)}};
  // nlohmann emits the shortest decimal that round-trips each double.
  return doc.dump(1) + "\n";
}

ModelParams deserialize(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != "kafnet-checkpoint") throw ValidationError("checkpoint: bad format tag");
    ModelParams p;
    p.config = config_from(doc.at("config"));
    p.learnable = tensors_from(doc.at("parameters"));
    p.buffers = tensors_from(doc.at("buffers"));
    const ModelParams reference = init_params(p.config);
    for (const auto* group : {&reference.learnable, &reference.buffers}) {
      const auto& loaded = group == &reference.learnable ? p.learnable : p.buffers;
      if (loaded.size() != group->size()) throw ValidationError("checkpoint: tensor set does not match config");
      for (const auto& [name, t] : *group) {
        auto it = loaded.find(name);
        if (it == loaded.end() || it->second.shape() != t.shape()) {
          throw ValidationError("checkpoint: missing or misshapen tensor '" + name + "'");
        }
      }
    }
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint '" + path + "'");
  out << serialize(params);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace kafnet
