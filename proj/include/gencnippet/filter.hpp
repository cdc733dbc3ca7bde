#pragma once

// Code-need classification and the selection gates (positive score, snippet
// count) that produce the fine-tuning funnel.

#include <cmath>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gencnippet/common.hpp"
#include "gencnippet/ingest.hpp"

namespace gencnippet::filter {

using ingest::QuestionPost;

// Names of the features produced by featurize(), in output order.
//
//   prose_log_length          ln(1 + characters of prose)
//   error_lexicon             1 if prose mentions an error term (error,
//                             exception, traceback, stack trace, crash, ...)
//   how_to_interrogative      1 if prose asks "how do/can I", "how to", ...
//   api_identifier_log_count  ln(1 + number of camelCase / snake_case tokens)
//   tag_java, tag_python      language flags from the tags
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> kNames{"prose_log_length",  "error_lexicon",
                                               "how_to_interrogative", "api_identifier_log_count",
                                               "tag_java",          "tag_python"};
  return kNames;
}

namespace detail {

inline bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
  for (auto n : needles) {
    if (haystack.find(n) != std::string_view::npos) return true;
  }
  return false;
}

// camelCase (lower then upper inside the word) or snake_case (inner '_').
inline bool is_api_identifier(std::string_view word) {
  if (word.size() < 3) return false;
  bool has_lower = false;
  for (std::size_t i = 0; i < word.size(); ++i) {
    const auto c = static_cast<unsigned char>(word[i]);
    if (std::islower(c)) has_lower = true;
    if (i > 0 && std::isupper(c) && has_lower) return true;
    if (c == '_' && i > 0 && i + 1 < word.size()) return true;
  }
  return false;
}

}  // namespace detail

inline std::vector<double> featurize(const QuestionPost& q) {
  const auto lower = to_lower(q.prose);
  std::vector<double> f(feature_names().size(), 0.0);

  f[0] = std::log1p(static_cast<double>(q.prose.size()));
  f[1] = detail::contains_any(lower, {"error", "exception", "traceback", "stack trace", "stacktrace",
                                      "crash", "segfault", "fails", "failed", "errno"})
             ? 1.0
             : 0.0;
  f[2] = detail::contains_any(lower, {"how do i", "how can i", "how to", "how would i",
                                      "how should i", "is there a way"})
             ? 1.0
             : 0.0;

  std::size_t identifiers = 0;
  std::string word;
  auto flush = [&] {
    if (detail::is_api_identifier(word)) ++identifiers;
    word.clear();
  };
  for (char c : q.prose) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') word.push_back(c);
    else flush();
  }
  flush();
  f[3] = std::log1p(static_cast<double>(identifiers));

  auto has_tag = [&](std::string_view t) {
    return std::find(q.tags.begin(), q.tags.end(), t) != q.tags.end();
  };
  f[4] = (q.language == Language::Java || has_tag("java")) ? 1.0 : 0.0;
  f[5] = (q.language == Language::Python || has_tag("python")) ? 1.0 : 0.0;
  return f;
}

// Logistic classifier over a named subset of featurize()'s features.
struct CodeNeedModel {
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  double threshold = 0.5;

  void validate() const {
    if (weights.size() != feature_names.size()) {
      throw ConfigError("model has " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(feature_names.size()) + " features");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
      throw ConfigError("model threshold must lie in (0,1), got " + std::to_string(threshold));
    }
    for (const auto& name : feature_names) {
      const auto& known = filter::feature_names();
      if (std::find(known.begin(), known.end(), name) == known.end()) {
        throw ConfigError("unknown feature '" + name + "'");
      }
    }
  }
};

inline CodeNeedModel model_from_json(const nlohmann::json& j) {
  CodeNeedModel m;
  try {
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.threshold = j.value("threshold", 0.5);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model parameters: ") + e.what());
  }
  m.validate();
  return m;
}

inline CodeNeedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("model file '" + path + "': " + e.what());
  }
}

inline nlohmann::ordered_json to_json(const CodeNeedModel& m) {
  nlohmann::ordered_json j;
  j["feature_names"] = m.feature_names;
  j["weights"] = m.weights;
  j["bias"] = m.bias;
  j["threshold"] = m.threshold;
  return j;
}

inline double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct NeedPrediction {
  bool needs_code = false;
  double score = 0.0;
};

inline NeedPrediction needs_code(const QuestionPost& q, const CodeNeedModel& model) {
  model.validate();
  const auto features = featurize(q);
  const auto& names = feature_names();
  double margin = model.bias;
  for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
    const auto idx = static_cast<std::size_t>(
        std::find(names.begin(), names.end(), model.feature_names[i]) - names.begin());
    margin += model.weights[i] * features[idx];
  }
  const double score = logistic(margin);
  return {score >= model.threshold, score};
}

// ------------------------------------------------------------------
// Gates
// ------------------------------------------------------------------

enum class Mode { Training, Generation };

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "training") return Mode::Training;
  if (s == "generation") return Mode::Generation;
  return std::nullopt;
}

enum class Reason { NonPositiveScore, MultiSnippet, NoSnippet, HasSnippet, NeedsCodeBelowThreshold };

inline constexpr std::string_view reason_code(Reason r) {
  switch (r) {
    case Reason::NonPositiveScore: return "NON_POSITIVE_SCORE";
    case Reason::MultiSnippet: return "MULTI_SNIPPET";
    case Reason::NoSnippet: return "NO_SNIPPET";
    case Reason::HasSnippet: return "HAS_SNIPPET";
    case Reason::NeedsCodeBelowThreshold: return "NEEDS_CODE_BELOW_THRESHOLD";
  }
  return "UNKNOWN";
}

struct GateOptions {
  Mode mode = Mode::Training;
  bool allow_multi_snippet = false;
};

struct FilterDecision {
  long long question_id = 0;
  bool needs_code = false;
  double need_score = 0.0;
  bool passed_quality = false;
  std::vector<Reason> reasons;
};

// Quality part of a decision: score >= 1 and the snippet count rule of the
// mode (training: exactly one block, or >= 1 with allow_multi_snippet;
// generation: none).
inline FilterDecision apply_quality_gates(const QuestionPost& q, const GateOptions& opts = {}) {
  FilterDecision d;
  d.question_id = q.id;
  if (q.score < 1) d.reasons.push_back(Reason::NonPositiveScore);
  const auto blocks = q.code_blocks.size();
  if (opts.mode == Mode::Training) {
    if (blocks == 0) d.reasons.push_back(Reason::NoSnippet);
    else if (blocks > 1 && !opts.allow_multi_snippet) d.reasons.push_back(Reason::MultiSnippet);
  } else if (blocks > 0) {
    d.reasons.push_back(Reason::HasSnippet);
  }
  d.passed_quality = d.reasons.empty();
  return d;
}

inline nlohmann::ordered_json to_json(const FilterDecision& d) {
  nlohmann::ordered_json j;
  j["question_id"] = d.question_id;
  j["needs_code"] = d.needs_code;
  j["need_score"] = d.need_score;
  j["passed_quality"] = d.passed_quality;
  auto& reasons = j["reasons"] = nlohmann::ordered_json::array();
  for (auto r : d.reasons) reasons.push_back(reason_code(r));
  return j;
}

struct FilterResult {
  std::vector<QuestionPost> selected;
  std::vector<FilterDecision> decisions;
  std::vector<ingest::StageFlags> flags;
  ingest::DatasetSummary summary;
};

inline FilterResult run_filter(const std::vector<QuestionPost>& questions, const CodeNeedModel& model,
                               const GateOptions& opts = {}) {
  model.validate();
  FilterResult out;
  out.decisions.reserve(questions.size());
  out.flags.reserve(questions.size());
  for (const auto& q : questions) {
    const auto need = needs_code(q, model);
    auto d = apply_quality_gates(q, opts);
    d.needs_code = need.needs_code;
    d.need_score = need.score;
    if (!need.needs_code) d.reasons.insert(d.reasons.begin(), Reason::NeedsCodeBelowThreshold);
    d.passed_quality = d.reasons.empty();

    // The funnel's first stage is the mode's candidate pool.
    ingest::StageFlags f;
    f.with_code = opts.mode == Mode::Training ? !q.code_blocks.empty() : q.code_blocks.empty();
    f.needs_code = f.with_code && need.needs_code;
    f.final_selected = f.needs_code && d.passed_quality;

    if (d.passed_quality) out.selected.push_back(q);
    out.decisions.push_back(std::move(d));
    out.flags.push_back(f);
  }
  out.summary = ingest::summarize(questions, out.flags);
  return out;
}

inline ingest::SummaryHeaders summary_headers(Mode mode) {
  if (mode == Mode::Training) return {};
  return {"Questions without Code Snippets", "Questions Needing Code Snippets",
          "Questions with Positive Score and No Code Snippet"};
}

}  // namespace gencnippet::filter
