#pragma once

// Backends with scripted behaviour for server tests.

#include <functional>

#include "gencnippet/backend.hpp"

namespace fixtures {

class ScriptedBackend final : public gencnippet::backend::Backend {
 public:
  using Script = std::function<gencnippet::backend::GenerationResult(const gencnippet::backend::GenerationRequest&)>;
  explicit ScriptedBackend(Script script) : Backend(64), script_(std::move(script)) {}

  gencnippet::backend::Kind kind() const override { return gencnippet::backend::Kind::Mock; }
  std::string model_id() const override { return "scripted"; }

 protected:
  gencnippet::backend::GenerationResult do_generate(const gencnippet::backend::GenerationRequest& r) override {
    return script_(r);
  }

 private:
  Script script_;
};

inline std::unique_ptr<gencnippet::backend::Backend> failing_backend(
    gencnippet::backend::BackendError::Kind kind = gencnippet::backend::BackendError::Kind::Upstream, int status = 500) {
  return std::make_unique<ScriptedBackend>([kind, status](const auto&) -> gencnippet::backend::GenerationResult {
    throw gencnippet::backend::BackendError(kind, "scripted failure", status);
  });
}

inline std::unique_ptr<gencnippet::backend::Backend> empty_backend() {
  return std::make_unique<ScriptedBackend>([](const auto&) {
    gencnippet::backend::GenerationResult r;
    r.raw_text = "```\n\n```";
    r.model_id = "scripted";
    return r;
  });
}

}  // namespace fixtures
