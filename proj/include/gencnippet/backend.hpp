#pragma once

// Model backends behind one generate() call: remote chat-completion
// endpoints, a deterministic mock, and a record/replay store keyed by the
// SHA-256 of the prompt.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "gencnippet/common.hpp"

namespace gencnippet::backend {

// ------------------------------------------------------------------
// Types
// ------------------------------------------------------------------

enum class Kind { Remote, Mock, Replay };

inline constexpr std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::Remote: return "remote";
    case Kind::Mock: return "mock";
    case Kind::Replay: return "replay";
  }
  return "mock";
}

inline std::optional<Kind> parse_kind(std::string_view s) {
  if (s == "remote") return Kind::Remote;
  if (s == "mock") return Kind::Mock;
  if (s == "replay") return Kind::Replay;
  return std::nullopt;
}

struct BackendConfig {
  Kind kind = Kind::Mock;
  std::string endpoint_url;  // full chat-completions URL for Kind::Remote
  std::string model_id = "mock";
  std::string api_key;  // never logged or echoed
  std::chrono::milliseconds timeout{30000};
  int max_output_tokens = 512;
  double temperature = 0.0;
  int retry_attempts = 3;
  std::chrono::milliseconds retry_backoff{250};
  std::string replay_dir;  // store for Kind::Replay, or for recording
  bool record = false;     // write every exchange into replay_dir
  std::size_t max_in_flight = 8;

  void validate() const {
    if (kind == Kind::Remote && endpoint_url.empty()) throw ConfigError("remote backend requires endpoint_url");
    if (kind == Kind::Replay && replay_dir.empty()) throw ConfigError("replay backend requires replay_dir");
    if (record && replay_dir.empty()) throw ConfigError("recording requires replay_dir");
    if (temperature < 0) throw ConfigError("temperature must be >= 0");
    if (retry_attempts < 1) throw ConfigError("retry attempts must be >= 1");
    if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be >= 1");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  }
};

// Rejects unknown keys.
inline BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig c = {}) {
  if (!j.is_object()) throw ConfigError("backend config must be an object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "kind") {
        auto k = parse_kind(value.get<std::string>());
        if (!k) throw ConfigError("unknown backend kind '" + value.get<std::string>() + "'");
        c.kind = *k;
      } else if (key == "endpoint_url") c.endpoint_url = value.get<std::string>();
      else if (key == "model_id") c.model_id = value.get<std::string>();
      else if (key == "api_key") c.api_key = value.get<std::string>();
      else if (key == "timeout_ms") c.timeout = std::chrono::milliseconds(value.get<long long>());
      else if (key == "max_output_tokens") c.max_output_tokens = value.get<int>();
      else if (key == "temperature") c.temperature = value.get<double>();
      else if (key == "retry_attempts") c.retry_attempts = value.get<int>();
      else if (key == "retry_backoff_ms") c.retry_backoff = std::chrono::milliseconds(value.get<long long>());
      else if (key == "replay_dir") c.replay_dir = value.get<std::string>();
      else if (key == "record") c.record = value.get<bool>();
      else if (key == "max_in_flight") c.max_in_flight = value.get<std::size_t>();
      else throw ConfigError("unknown backend key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid backend config: ") + e.what());
  }
  return c;
}

// Effective configuration without credentials.
inline nlohmann::ordered_json sanitized_json(const BackendConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(c.kind);
  j["endpoint_url"] = c.endpoint_url;
  j["model_id"] = c.model_id;
  j["timeout_ms"] = c.timeout.count();
  j["max_output_tokens"] = c.max_output_tokens;
  j["temperature"] = c.temperature;
  j["retry_attempts"] = c.retry_attempts;
  j["retry_backoff_ms"] = c.retry_backoff.count();
  j["max_in_flight"] = c.max_in_flight;
  return j;
}

struct GenerationRequest {
  std::string prompt;
  Language language = Language::Python;
  std::string request_id;
};

struct GenerationResult {
  std::string raw_text;
  std::string code;
  std::string model_id;
  std::chrono::milliseconds latency{0};
  std::optional<long long> prompt_tokens;
  std::optional<long long> completion_tokens;
};

class BackendError : public Error {
 public:
  enum class Kind { Timeout, Upstream, Transport, CacheMiss };

  BackendError(Kind kind, const std::string& message, int status = 0, std::string body_excerpt = {})
      : Error(code_for(kind), message), kind_(kind), status_(status), body_excerpt_(std::move(body_excerpt)) {}

  Kind kind() const noexcept { return kind_; }
  int status() const noexcept { return status_; }
  const std::string& body_excerpt() const noexcept { return body_excerpt_; }

 private:
  static std::string code_for(Kind k) {
    switch (k) {
      case Kind::Timeout: return "BACKEND_TIMEOUT";
      case Kind::Upstream: return "BACKEND_ERROR";
      case Kind::Transport: return "BACKEND_UNREACHABLE";
      case Kind::CacheMiss: return "REPLAY_CACHE_MISS";
    }
    return "BACKEND_ERROR";
  }

  Kind kind_;
  int status_;
  std::string body_excerpt_;
};

// ------------------------------------------------------------------
// Helpers
// ------------------------------------------------------------------

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

inline std::string make_request_id() {
  thread_local std::mt19937_64 rng{std::random_device{}() ^
                                   static_cast<std::uint64_t>(std::hash<std::thread::id>{}(std::this_thread::get_id()))};
  static std::atomic<std::uint64_t> counter{0};
  char buf[40];
  std::snprintf(buf, sizeof buf, "req-%016llx%08llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(counter.fetch_add(1) & 0xffffffffULL));
  return buf;
}

namespace detail {

inline std::string_view strip_blank_lines(std::string_view s) {
  // Leading whitespace-only lines.
  while (true) {
    const auto nl = s.find('\n');
    if (nl == std::string_view::npos || !trim(s.substr(0, nl)).empty()) break;
    s.remove_prefix(nl + 1);
  }
  if (trim(s).empty()) return {};
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string extract_once(std::string_view raw) {
  const auto fence = raw.find("```");
  if (fence != std::string_view::npos) {
    auto body = raw.substr(fence + 3);
    const auto nl = body.find('\n');
    body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
    const auto close = body.find("```");
    if (close != std::string_view::npos) body = body.substr(0, close);
    return std::string(strip_blank_lines(body));
  }
  auto lead = raw;
  while (!lead.empty() && std::isspace(static_cast<unsigned char>(lead.front()))) lead.remove_prefix(1);
  if (lead.starts_with("Code:")) {
    lead.remove_prefix(5);
    while (!lead.empty() && (lead.front() == ' ' || lead.front() == '\t')) lead.remove_prefix(1);
    return std::string(strip_blank_lines(lead));
  }
  return std::string(strip_blank_lines(raw));
}

}  // namespace detail

// First fenced block, else the text after a leading "Code:" marker, else the
// text itself; surrounding blank lines removed. Applied until stable so the
// function is idempotent. Every non-fixpoint step shortens the text.
inline std::string extract_code(std::string_view raw_text) {
  std::string current(raw_text);
  while (true) {
    auto next = detail::extract_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

// ------------------------------------------------------------------
// Backend interface
// ------------------------------------------------------------------

class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit) : limit_(limit) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t limit_;
  std::size_t in_flight_ = 0;
};

// Backends are safe for concurrent generate() calls.
class Backend {
 public:
  explicit Backend(std::size_t max_in_flight = 8) : limiter_(max_in_flight) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  GenerationResult generate(const GenerationRequest& request) {
    if (trim(request.prompt).empty()) throw ValidationError("EMPTY_PROMPT", "prompt is empty");
    limiter_.acquire();
    struct Release {
      InFlightLimiter& l;
      ~Release() { l.release(); }
    } release{limiter_};
    const auto start = std::chrono::steady_clock::now();
    auto result = do_generate(request);
    result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return result;
  }

  virtual Kind kind() const = 0;
  virtual std::string model_id() const = 0;
  // Reachability; only remote backends can be unhealthy.
  virtual bool healthy() { return true; }

 protected:
  virtual GenerationResult do_generate(const GenerationRequest& request) = 0;

 private:
  InFlightLimiter limiter_;
};

// ------------------------------------------------------------------
// Mock
// ------------------------------------------------------------------

// First line of the problem description found in a prompt of either profile.
inline std::string description_first_line(std::string_view prompt) {
  std::string_view desc = prompt;
  constexpr std::string_view kHeader = "[Problem Description]: ";
  if (const auto p = prompt.find(kHeader); p != std::string_view::npos) {
    desc = prompt.substr(p + kHeader.size());
  } else if (prompt.starts_with("Question: ")) {
    desc = prompt.substr(10);
    if (const auto l = desc.find(" Language: ["); l != std::string_view::npos) desc = desc.substr(0, l);
  }
  desc = trim(desc);
  const auto nl = desc.find('\n');
  return std::string(trim(desc.substr(0, nl)));
}

// Language-appropriate stub whose comment echoes the first description line.
inline std::string mock_completion(std::string_view prompt, Language lang) {
  const auto line = description_first_line(prompt);
  if (lang == Language::Python) {
    return "```python\n# " + line + "\ndef example():\n    raise NotImplementedError\n```\n";
  }
  return "```java\n// " + line +
         "\npublic class Example {\n    public static void main(String[] args) {\n    }\n}\n```\n";
}

class MockBackend final : public Backend {
 public:
  explicit MockBackend(std::string model_id = "mock", std::size_t max_in_flight = 64)
      : Backend(max_in_flight), model_id_(std::move(model_id)) {}

  Kind kind() const override { return Kind::Mock; }
  std::string model_id() const override { return model_id_; }

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override {
    GenerationResult r;
    r.raw_text = mock_completion(request.prompt, request.language);
    r.code = extract_code(r.raw_text);
    r.model_id = model_id_;
    return r;
  }

 private:
  std::string model_id_;
};

// ------------------------------------------------------------------
// Replay store
// ------------------------------------------------------------------

class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::filesystem::path path_for(std::string_view prompt) const { return dir_ / (sha256_hex(prompt) + ".json"); }

  void put(std::string_view prompt, const GenerationResult& result) const {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create replay dir '" + dir_.string() + "': " + ec.message());
    nlohmann::ordered_json j;
    j["prompt"] = prompt;
    j["raw_text"] = result.raw_text;
    j["model_id"] = result.model_id;
    if (result.prompt_tokens) j["prompt_tokens"] = *result.prompt_tokens;
    if (result.completion_tokens) j["completion_tokens"] = *result.completion_tokens;
    const auto target = path_for(prompt);
    auto tmp = target;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw IoError("cannot write '" + tmp.string() + "'");
      out << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw IoError("cannot store '" + target.string() + "': " + ec.message());
  }

  std::optional<GenerationResult> get(std::string_view prompt) const {
    const auto path = path_for(prompt);
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(in);
      // Guard against digest collisions and hand-edited stores.
      if (j.at("prompt").get<std::string>() != prompt) return std::nullopt;
      GenerationResult r;
      r.raw_text = j.at("raw_text").get<std::string>();
      r.code = extract_code(r.raw_text);
      r.model_id = j.value("model_id", "");
      if (j.contains("prompt_tokens")) r.prompt_tokens = j["prompt_tokens"].get<long long>();
      if (j.contains("completion_tokens")) r.completion_tokens = j["completion_tokens"].get<long long>();
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw IoError("corrupt replay entry '" + path.string() + "': " + e.what());
    }
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

class ReplayBackend final : public Backend {
 public:
  ReplayBackend(std::filesystem::path dir, std::string model_id, std::size_t max_in_flight = 64)
      : Backend(max_in_flight), store_(std::move(dir)), model_id_(std::move(model_id)) {}

  Kind kind() const override { return Kind::Replay; }
  std::string model_id() const override { return model_id_; }
  bool healthy() override { return std::filesystem::is_directory(store_.dir()); }

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override {
    auto hit = store_.get(request.prompt);
    if (!hit) {
      throw BackendError(BackendError::Kind::CacheMiss,
                         "no recorded response for prompt digest " + sha256_hex(request.prompt));
    }
    return *hit;
  }

 private:
  ReplayStore store_;
  std::string model_id_;
};

// Stores every successful exchange of `inner` for later replay.
class RecordingBackend final : public Backend {
 public:
  RecordingBackend(std::unique_ptr<Backend> inner, std::filesystem::path dir)
      : Backend(1 << 16), inner_(std::move(inner)), store_(std::move(dir)) {}

  Kind kind() const override { return inner_->kind(); }
  std::string model_id() const override { return inner_->model_id(); }
  bool healthy() override { return inner_->healthy(); }

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override {
    auto r = inner_->generate(request);
    store_.put(request.prompt, r);
    return r;
  }

 private:
  std::unique_ptr<Backend> inner_;
  ReplayStore store_;
};

// ------------------------------------------------------------------
// Remote
// ------------------------------------------------------------------

struct ParsedUrl {
  std::string scheme_host_port;  // "http://127.0.0.1:8080"
  std::string path;              // "/v1/chat/completions"
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL without scheme: '" + url + "'");
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl p;
  p.scheme_host_port = url.substr(0, path_start);
  p.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (p.scheme_host_port.size() <= scheme_end + 3) throw ConfigError("endpoint URL without host: '" + url + "'");
  return p;
}

inline std::string excerpt(std::string_view body, std::size_t n = 200) {
  return std::string(body.substr(0, std::min(n, body.size())));
}

// One JSON POST with retries on transport failures, 429 and 5xx.
struct JsonPostOptions {
  std::chrono::milliseconds timeout{30000};
  int attempts = 3;
  std::chrono::milliseconds backoff{250};
  httplib::Headers headers;
};

inline nlohmann::json post_json(const ParsedUrl& url, const nlohmann::json& body, const JsonPostOptions& opts) {
  const auto payload = body.dump();
  BackendError last(BackendError::Kind::Transport, "no attempt made");
  for (int attempt = 1; attempt <= opts.attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(opts.backoff * (1 << std::min(attempt - 2, 10)));
    httplib::Client client(url.scheme_host_port);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opts.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(url.path, opts.headers, payload, "application/json");
    const auto elapsed = std::chrono::steady_clock::now() - start;
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             (err == httplib::Error::Read && elapsed >= opts.timeout * 9 / 10);
      last = timed_out ? BackendError(BackendError::Kind::Timeout,
                                      "request timed out after " + std::to_string(opts.timeout.count()) + " ms")
                       : BackendError(BackendError::Kind::Transport, "transport error: " + httplib::to_string(err));
      continue;
    }
    if (res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error&) {
        throw BackendError(BackendError::Kind::Upstream, "response is not JSON", res->status, excerpt(res->body));
      }
    }
    last = BackendError(BackendError::Kind::Upstream, "upstream returned HTTP " + std::to_string(res->status),
                        res->status, excerpt(res->body));
    if (res->status != 429 && res->status < 500) throw last;
  }
  throw last;
}

// OpenAI-style chat completion: one user message, reply from the first choice.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config)
      : Backend(config.max_in_flight), config_(std::move(config)), url_(parse_url(config_.endpoint_url)) {}

  Kind kind() const override { return Kind::Remote; }
  std::string model_id() const override { return config_.model_id; }

  // Any HTTP answer from the endpoint host counts as reachable. Cached for 5 s.
  bool healthy() override {
    std::lock_guard lock(health_mu_);
    const auto now = std::chrono::steady_clock::now();
    if (last_probe_ && now - *last_probe_ < std::chrono::seconds(5)) return last_healthy_;
    httplib::Client client(url_.scheme_host_port);
    client.set_connection_timeout(1, 0);
    client.set_read_timeout(2, 0);
    last_healthy_ = static_cast<bool>(client.Get("/"));
    last_probe_ = now;
    return last_healthy_;
  }

  static nlohmann::json request_body(const BackendConfig& c, const std::string& prompt) {
    nlohmann::json body;
    body["model"] = c.model_id;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = c.temperature;
    body["max_tokens"] = c.max_output_tokens;
    return body;
  }

 protected:
  GenerationResult do_generate(const GenerationRequest& request) override {
    JsonPostOptions opts;
    opts.timeout = config_.timeout;
    opts.attempts = config_.retry_attempts;
    opts.backoff = config_.retry_backoff;
    if (!config_.api_key.empty()) opts.headers.emplace("Authorization", "Bearer " + config_.api_key);
    if (!request.request_id.empty()) opts.headers.emplace("X-Request-Id", request.request_id);

    const auto reply = post_json(url_, request_body(config_, request.prompt), opts);
    GenerationResult r;
    try {
      r.raw_text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw BackendError(BackendError::Kind::Upstream, "response lacks choices[0].message.content", 200,
                         excerpt(reply.dump()));
    }
    r.code = extract_code(r.raw_text);
    r.model_id = reply.value("model", config_.model_id);
    if (reply.contains("usage") && reply["usage"].is_object()) {
      const auto& u = reply["usage"];
      if (u.contains("prompt_tokens")) r.prompt_tokens = u["prompt_tokens"].get<long long>();
      if (u.contains("completion_tokens")) r.completion_tokens = u["completion_tokens"].get<long long>();
    }
    return r;
  }

 private:
  BackendConfig config_;
  ParsedUrl url_;
  std::mutex health_mu_;
  std::optional<std::chrono::steady_clock::time_point> last_probe_;
  bool last_healthy_ = false;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  std::unique_ptr<Backend> b;
  switch (config.kind) {
    case Kind::Mock: b = std::make_unique<MockBackend>(config.model_id, config.max_in_flight); break;
    case Kind::Replay: b = std::make_unique<ReplayBackend>(config.replay_dir, config.model_id, config.max_in_flight); break;
    case Kind::Remote: b = std::make_unique<RemoteBackend>(config); break;
  }
  if (config.record && config.kind != Kind::Replay) b = std::make_unique<RecordingBackend>(std::move(b), config.replay_dir);
  return b;
}

}  // namespace gencnippet::backend
