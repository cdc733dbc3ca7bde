#pragma once

// Pipeline configuration file shared by all subcommands.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gencnippet/backend.hpp"
#include "gencnippet/common.hpp"
#include "gencnippet/eval.hpp"
#include "gencnippet/ingest.hpp"
#include "gencnippet/server.hpp"

namespace gencnippet {

inline constexpr const char* kConfigEnvVar = "GENCNIPPET_CONFIG";

struct MetricSettings {
  int bleu_max_n = 4;
  eval::Smoothing smoothing = eval::Smoothing::AddEpsilon;
  std::string embedder = "hashing";  // hashing | remote
  std::size_t hashing_dim = 256;
  std::string embed_url;
  std::string embed_model;
  std::string embed_api_key;
  std::size_t threads = 0;
};

struct PipelineConfig {
  std::vector<Language> languages = ingest::default_languages();
  std::uint64_t seed = 42;
  std::map<std::string, std::string> paths;  // free-form named paths (posts, model, pool, ...)
  std::string model_path = "configs/code_need_model.json";
  backend::BackendConfig backend;
  MetricSettings metrics;
  server::ServerConfig server;

  void validate() const {
    if (languages.empty()) throw ConfigError("languages must not be empty");
    backend.validate();
    if (metrics.bleu_max_n < 1) throw ConfigError("metrics.bleu_max_n must be >= 1");
    if (metrics.embedder != "hashing" && metrics.embedder != "remote") {
      throw ConfigError("metrics.embedder must be hashing or remote");
    }
    if (metrics.embedder == "remote" && metrics.embed_url.empty()) {
      throw ConfigError("remote embedder requires metrics.embed_url");
    }
    if (metrics.hashing_dim == 0) throw ConfigError("metrics.hashing_dim must be positive");
    if (server.port < 0 || server.port > 65535) throw ConfigError("server.port out of range");
  }

  std::optional<std::string> path(const std::string& name) const {
    auto it = paths.find(name);
    if (it == paths.end()) return std::nullopt;
    return it->second;
  }
};

inline MetricSettings metric_settings_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("metrics must be an object");
  MetricSettings m;
  for (const auto& [key, value] : j.items()) {
    if (key == "bleu_max_n") m.bleu_max_n = value.get<int>();
    else if (key == "smoothing") {
      auto s = eval::parse_smoothing(value.get<std::string>());
      if (!s) throw ConfigError("unknown smoothing '" + value.get<std::string>() + "'");
      m.smoothing = *s;
    } else if (key == "embedder") m.embedder = value.get<std::string>();
    else if (key == "hashing_dim") m.hashing_dim = value.get<std::size_t>();
    else if (key == "embed_url") m.embed_url = value.get<std::string>();
    else if (key == "embed_model") m.embed_model = value.get<std::string>();
    else if (key == "embed_api_key") m.embed_api_key = value.get<std::string>();
    else if (key == "threads") m.threads = value.get<std::size_t>();
    else throw ConfigError("unknown metrics key '" + key + "'");
  }
  return m;
}

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "languages") {
        c.languages.clear();
        for (const auto& l : value) {
          auto lang = parse_language(l.get<std::string>());
          if (!lang) throw ConfigError("unsupported language '" + l.get<std::string>() + "'");
          c.languages.push_back(*lang);
        }
      } else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "paths") c.paths = value.get<std::map<std::string, std::string>>();
      else if (key == "model") c.model_path = value.get<std::string>();
      else if (key == "backend") c.backend = backend::backend_config_from_json(value);
      else if (key == "metrics") c.metrics = metric_settings_from_json(value);
      else if (key == "server") server::apply_server_json(c.server, value);
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.server.backend = c.backend;
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return pipeline_config_from_json(j);
}

// Explicit path first, then $GENCNIPPET_CONFIG, then built-in defaults.
inline PipelineConfig resolve_pipeline_config(const std::string& explicit_path) {
  if (!explicit_path.empty()) return load_pipeline_config(explicit_path);
  if (const char* env = std::getenv(kConfigEnvVar); env && *env) return load_pipeline_config(env);
  return {};
}

inline std::shared_ptr<const eval::Embedder> make_embedder(const MetricSettings& m) {
  if (m.embedder == "remote") {
    return std::make_shared<eval::RemoteEmbedder>(m.embed_url, m.embed_model, m.embed_api_key);
  }
  return std::make_shared<eval::HashingEmbedder>(m.hashing_dim);
}

inline eval::MetricConfig metric_config(const MetricSettings& m) {
  eval::MetricConfig c;
  c.bleu_max_n = m.bleu_max_n;
  c.smoothing = m.smoothing;
  c.embedder = make_embedder(m);
  c.threads = m.threads;
  return c;
}

}  // namespace gencnippet
