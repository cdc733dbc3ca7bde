#pragma once

// HTTP front end for the browser client: POST /api/v1/generate,
// GET /health and GET /api/v1/config.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "gencnippet/backend.hpp"
#include "gencnippet/common.hpp"
#include "gencnippet/dataset.hpp"
#include "gencnippet/prompt.hpp"

namespace gencnippet::server {

inline constexpr std::size_t kDefaultMaxBodyBytes = 64 * 1024;

enum class Mode { ZeroShot, FewShot };

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "zero_shot") return Mode::ZeroShot;
  if (s == "few_shot") return Mode::FewShot;
  return std::nullopt;
}

inline constexpr std::string_view mode_name(Mode m) { return m == Mode::ZeroShot ? "zero_shot" : "few_shot"; }

struct ServerConfig {
  backend::BackendConfig backend;
  prompt::Profile prompt_profile = prompt::Profile::Foundation;
  Mode default_mode = Mode::ZeroShot;
  std::string exemplar_pool;  // TrainingRecord JSONL for few-shot mode
  std::size_t shots = 2;
  std::uint64_t seed = 42;
  std::vector<std::string> allowed_origins{"https://stackoverflow.com", "http://localhost", "http://127.0.0.1"};
  int rate_limit_per_minute = 10;  // per client IP; 0 disables
  std::size_t max_body_bytes = kDefaultMaxBodyBytes;
  std::string journal_path;  // opt-in request journal
  std::string host = "127.0.0.1";
  int port = 8080;
};

inline std::vector<std::string> split_csv(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    start = end + 1;
  }
  return out;
}

// Server section of a config file; unknown keys are rejected.
inline void apply_server_json(ServerConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("server config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "prompt_profile") {
        auto p = prompt::parse_profile(value.get<std::string>());
        if (!p) throw ConfigError("unknown prompt_profile '" + value.get<std::string>() + "'");
        c.prompt_profile = *p;
      } else if (key == "default_mode") {
        auto m = parse_mode(value.get<std::string>());
        if (!m) throw ConfigError("unknown default_mode '" + value.get<std::string>() + "'");
        c.default_mode = *m;
      } else if (key == "exemplar_pool") c.exemplar_pool = value.get<std::string>();
      else if (key == "shots") c.shots = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "allowed_origins") c.allowed_origins = value.get<std::vector<std::string>>();
      else if (key == "rate_limit_per_minute") c.rate_limit_per_minute = value.get<int>();
      else if (key == "max_body_bytes") c.max_body_bytes = value.get<std::size_t>();
      else if (key == "journal_path") c.journal_path = value.get<std::string>();
      else if (key == "host") c.host = value.get<std::string>();
      else if (key == "port") c.port = value.get<int>();
      else throw ConfigError("unknown server key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid server config: ") + e.what());
  }
}

// GENCNIPPET_ENDPOINT_URL, _MODEL_ID, _API_KEY, _ALLOWED_ORIGINS, _RATE_LIMIT.
inline void apply_env_overrides(ServerConfig& c) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("GENCNIPPET_ENDPOINT_URL")) {
    c.backend.endpoint_url = *v;
    c.backend.kind = backend::Kind::Remote;
  }
  if (auto v = env("GENCNIPPET_MODEL_ID")) c.backend.model_id = *v;
  if (auto v = env("GENCNIPPET_API_KEY")) c.backend.api_key = *v;
  if (auto v = env("GENCNIPPET_ALLOWED_ORIGINS")) c.allowed_origins = split_csv(*v);
  if (auto v = env("GENCNIPPET_RATE_LIMIT")) {
    try {
      c.rate_limit_per_minute = std::stoi(*v);
    } catch (const std::exception&) {
      throw ConfigError("GENCNIPPET_RATE_LIMIT must be an integer");
    }
  }
}

// ------------------------------------------------------------------
// Rate limiting
// ------------------------------------------------------------------

// Token bucket per key: `per_minute` capacity, refilled continuously.
class RateLimiter {
 public:
  explicit RateLimiter(int per_minute) : per_minute_(per_minute) {}

  bool allow(const std::string& key, std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now()) {
    if (per_minute_ <= 0) return true;
    std::lock_guard lock(mu_);
    auto [it, fresh] = buckets_.try_emplace(key, Bucket{static_cast<double>(per_minute_), now});
    auto& b = it->second;
    if (!fresh) {
      const double elapsed = std::chrono::duration<double>(now - b.last).count();
      b.tokens = std::min<double>(per_minute_, b.tokens + elapsed * per_minute_ / 60.0);
      b.last = now;
    }
    if (b.tokens < 1.0) return false;
    b.tokens -= 1.0;
    return true;
  }

 private:
  struct Bucket {
    double tokens;
    std::chrono::steady_clock::time_point last;
  };
  int per_minute_;
  std::mutex mu_;
  std::unordered_map<std::string, Bucket> buckets_;
};

// ------------------------------------------------------------------
// Service (transport independent)
// ------------------------------------------------------------------

struct ApiResponse {
  int status = 200;
  nlohmann::ordered_json body;
};

struct Metrics {
  std::atomic<std::uint64_t> requests{0};
  std::atomic<std::uint64_t> succeeded{0};
  std::atomic<std::uint64_t> client_errors{0};
  std::atomic<std::uint64_t> backend_errors{0};
  std::atomic<std::uint64_t> rate_limited{0};
};

class GenerationService {
 public:
  GenerationService(ServerConfig config, std::unique_ptr<backend::Backend> backend)
      : config_(std::move(config)), backend_(std::move(backend)), limiter_(config_.rate_limit_per_minute) {
    if (!config_.exemplar_pool.empty()) pool_ = dataset::read_records(config_.exemplar_pool);
  }

  explicit GenerationService(ServerConfig config)
      : GenerationService(config, backend::make_backend(config.backend)) {}

  ApiResponse generate(std::string_view body, const std::string& client_ip = "local") {
    ++metrics_.requests;
    const auto request_id = backend::make_request_id();
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&](ApiResponse r, std::string_view language, std::size_t description_chars) {
      if (r.status != 200) r.body["request_id"] = request_id;
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      nlohmann::ordered_json log;
      log["event"] = "generate";
      log["request_id"] = request_id;
      log["status"] = r.status;
      log["language"] = language;
      log["description_chars"] = description_chars;
      log["latency_ms"] = ms.count();
      spdlog::info(log.dump());
      if (r.status == 200) ++metrics_.succeeded;
      else if (r.status >= 500) ++metrics_.backend_errors;
      else ++metrics_.client_errors;
      return r;
    };

    if (!limiter_.allow(client_ip)) {
      ++metrics_.rate_limited;
      return finish(error(429, "RATE_LIMITED", {}, "too many requests"), "", 0);
    }
    if (body.size() > config_.max_body_bytes) {
      return finish(error(413, "BODY_TOO_LARGE", {}, "request body exceeds " + std::to_string(config_.max_body_bytes) + " bytes"), "", 0);
    }
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      return finish(error(400, "INVALID_JSON", {}, "body is not valid JSON"), "", 0);
    }
    if (!req.is_object()) return finish(error(400, "INVALID_BODY", {}, "body must be a JSON object"), "", 0);

    if (!req.contains("description")) return finish(error(400, "MISSING_FIELD", "description", "description is required"), "", 0);
    if (!req["description"].is_string()) return finish(error(400, "INVALID_FIELD", "description", "description must be a string"), "", 0);
    const auto description = req["description"].get<std::string>();
    if (trim(description).empty()) return finish(error(400, "EMPTY_DESCRIPTION", "description", "description is empty"), "", 0);

    if (!req.contains("language")) return finish(error(400, "MISSING_FIELD", "language", "language is required"), "", description.size());
    if (!req["language"].is_string()) return finish(error(400, "INVALID_FIELD", "language", "language must be a string"), "", description.size());
    const auto lang_text = req["language"].get<std::string>();
    const auto language = parse_language(lang_text);
    if (!language) {
      return finish(error(422, "UNSUPPORTED_LANGUAGE", "language", "supported languages are java and python"), "", description.size());
    }

    prompt::PromptSpec spec;
    spec.problem_description = description;
    spec.language = *language;
    if (req.contains("constraints") && !req["constraints"].is_null()) {
      if (!req["constraints"].is_string()) return finish(error(400, "INVALID_FIELD", "constraints", "constraints must be a string"), tag_name(*language), description.size());
      spec.constraints = req["constraints"].get<std::string>();
    }
    auto mode = config_.default_mode;
    if (req.contains("mode") && !req["mode"].is_null()) {
      const auto m = req["mode"].is_string() ? parse_mode(req["mode"].get<std::string>()) : std::nullopt;
      if (!m) return finish(error(400, "INVALID_FIELD", "mode", "mode must be zero_shot or few_shot"), tag_name(*language), description.size());
      mode = *m;
    }
    if (req.contains("client_version") && !req["client_version"].is_null() && !req["client_version"].is_string()) {
      return finish(error(400, "INVALID_FIELD", "client_version", "client_version must be a string"), tag_name(*language), description.size());
    }

    std::string prompt_text;
    try {
      if (mode == Mode::FewShot && config_.prompt_profile == prompt::Profile::Foundation) {
        if (pool_.empty()) {
          return finish(error(422, "FEW_SHOT_UNAVAILABLE", "mode", "no exemplar pool configured"), tag_name(*language), description.size());
        }
        spec.exemplars = prompt::select_exemplars(pool_, *language, config_.shots, config_.seed);
      }
      prompt_text = prompt::build(config_.prompt_profile, spec,
                                  std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()));
    } catch (const ValidationError& e) {
      if (e.code() == "NOT_ENOUGH_EXEMPLARS") {
        return finish(error(422, "FEW_SHOT_UNAVAILABLE", "mode", e.what()), tag_name(*language), description.size());
      }
      return finish(error(400, e.code(), "description", e.what()), tag_name(*language), description.size());
    }

    backend::GenerationResult result;
    try {
      result = backend_->generate({prompt_text, *language, request_id});
    } catch (const backend::BackendError& e) {
      const bool timeout = e.kind() == backend::BackendError::Kind::Timeout;
      auto r = error(timeout ? 504 : 502, e.code(), {}, e.what());
      if (e.status()) r.body["error"]["upstream_status"] = e.status();
      return finish(std::move(r), tag_name(*language), description.size());
    } catch (const Error& e) {
      return finish(error(502, "BACKEND_ERROR", {}, e.what()), tag_name(*language), description.size());
    }
    if (trim(result.code).empty()) {
      return finish(error(502, "EMPTY_SNIPPET", {}, "backend returned no code"), tag_name(*language), description.size());
    }

    ApiResponse ok;
    ok.body["snippet"] = result.code;
    ok.body["model_id"] = result.model_id;
    ok.body["prompt_profile"] = prompt::profile_name(config_.prompt_profile);
    ok.body["latency_ms"] = result.latency.count();
    ok.body["request_id"] = request_id;
    journal(request_id, description, *language, result.code);
    return finish(std::move(ok), tag_name(*language), description.size());
  }

  ApiResponse health() {
    ApiResponse r;
    const bool up = backend_->healthy();
    r.status = up ? 200 : 503;
    r.body["status"] = up ? "ok" : "unavailable";
    r.body["backend_kind"] = backend::kind_name(backend_->kind());
    r.body["model_id"] = backend_->model_id();
    return r;
  }

  // Effective configuration without credentials, in a fixed field order.
  ApiResponse config() const {
    ApiResponse r;
    auto& b = r.body;
    b["prompt_profile"] = prompt::profile_name(config_.prompt_profile);
    b["model_id"] = config_.backend.model_id;
    b["default_mode"] = mode_name(config_.default_mode);
    b["backend"] = backend::sanitized_json(config_.backend);
    b["few_shot"] = {{"enabled", !pool_.empty()}, {"shots", config_.shots}, {"seed", config_.seed}};
    b["allowed_origins"] = config_.allowed_origins;
    b["rate_limit_per_minute"] = config_.rate_limit_per_minute;
    b["max_body_bytes"] = config_.max_body_bytes;
    b["journal_enabled"] = !config_.journal_path.empty();
    b["supported_languages"] = {"java", "python"};
    return r;
  }

  ApiResponse metrics() const {
    ApiResponse r;
    r.body["requests"] = metrics_.requests.load();
    r.body["succeeded"] = metrics_.succeeded.load();
    r.body["client_errors"] = metrics_.client_errors.load();
    r.body["backend_errors"] = metrics_.backend_errors.load();
    r.body["rate_limited"] = metrics_.rate_limited.load();
    return r;
  }

  bool origin_allowed(std::string_view origin) const {
    for (const auto& allowed : config_.allowed_origins) {
      if (allowed == "*" || origin == allowed) return true;
      if (origin.size() > allowed.size() && origin.starts_with(allowed) && origin[allowed.size()] == ':') return true;
    }
    return false;
  }

  const ServerConfig& settings() const { return config_; }

 private:
  static ApiResponse error(int status, std::string code, std::string field, std::string message) {
    ApiResponse r;
    r.status = status;
    auto& e = r.body["error"];
    e["code"] = std::move(code);
    e["field"] = field.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(field);
    e["message"] = std::move(message);
    return r;
  }

  void journal(const std::string& request_id, const std::string& description, Language lang, const std::string& snippet) {
    if (config_.journal_path.empty()) return;
    nlohmann::ordered_json j;
    j["request_id"] = request_id;
    j["timestamp"] = format_timestamp(std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()));
    j["language"] = tag_name(lang);
    j["description"] = description;
    j["snippet"] = snippet;
    std::lock_guard lock(journal_mu_);
    std::ofstream out(config_.journal_path, std::ios::app | std::ios::binary);
    if (out) out << j.dump() << '\n';
    else spdlog::warn("cannot append to journal {}", config_.journal_path);
  }

  ServerConfig config_;
  std::unique_ptr<backend::Backend> backend_;
  RateLimiter limiter_;
  std::vector<dataset::TrainingRecord> pool_;
  Metrics metrics_;
  std::mutex journal_mu_;
};

// ------------------------------------------------------------------
// HTTP binding
// ------------------------------------------------------------------

class ApiServer {
 public:
  explicit ApiServer(std::shared_ptr<GenerationService> service) : service_(std::move(service)) {
    http_.set_payload_max_length(service_->settings().max_body_bytes + 1);
    // No SO_REUSEPORT: a second server on a busy port must fail to bind.
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    auto send = [this](const httplib::Request& req, httplib::Response& res, const ApiResponse& r) {
      cors(req, res);
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    http_.Post("/api/v1/generate", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(req, res, service_->generate(req.body, req.remote_addr));
    });
    http_.Get("/health", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(req, res, service_->health());
    });
    http_.Get("/api/v1/config", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(req, res, service_->config());
    });
    http_.Get("/api/v1/metrics", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(req, res, service_->metrics());
    });
    http_.Options(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
      if (!cors(req, res)) {
        res.status = 403;
        return;
      }
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Max-Age", "600");
      res.status = 204;
    });
  }

  ~ApiServer() { stop(); }

  // Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port) {
    const int bound = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    port_ = bound;
    return bound;
  }

  // Blocks until stop().
  void run() { http_.listen_after_bind(); }

  void start_background() {
    worker_ = std::thread([this] { run(); });
    http_.wait_until_ready();
  }

  void stop() {
    if (http_.is_running()) http_.stop();
    if (worker_.joinable()) worker_.join();
  }

  int port() const { return port_; }

 private:
  bool cors(const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (origin.empty() || !service_->origin_allowed(origin)) return false;
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Vary", "Origin");
    return true;
  }

  std::shared_ptr<GenerationService> service_;
  httplib::Server http_;
  std::thread worker_;
  int port_ = -1;
};

}  // namespace gencnippet::server
