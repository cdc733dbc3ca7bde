#pragma once

// Generation prompts: the bracketed-section template used for foundation
// models (zero- and few-shot) and the bare input format of fine-tuned models.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "gencnippet/common.hpp"
#include "gencnippet/dataset.hpp"

namespace gencnippet::prompt {

inline constexpr std::string_view kPreamble =
    "I am working on a programming problem and need help generating a representative code "
    "example to demonstrate my programming issue.";

inline constexpr std::string_view kObjective =
    "Generate a code example that aligns with the provided details, demonstrates the problem "
    "clearly, and contains intentional faults related to the described issue. Keep the example "
    "concise and focused to ensure clarity for troubleshooting.";

inline constexpr std::string_view kDescriptionHeader = "[Problem Description]:";
inline constexpr std::string_view kLanguageHeader = "[Programming Language]:";
inline constexpr std::string_view kConstraintsHeader = "[Constraints and Requirements]:";
inline constexpr std::string_view kObjectiveHeader = "[Objective]:";

inline constexpr std::size_t kDefaultMaxExemplars = 3;

struct Exemplar {
  std::string description;
  std::string code;
};

struct PromptSpec {
  std::string problem_description;
  Language language = Language::Python;
  std::optional<std::string> constraints;
  std::vector<Exemplar> exemplars;
  std::size_t max_exemplars = kDefaultMaxExemplars;
};

enum class Profile { Foundation, FineTuned };

inline std::optional<Profile> parse_profile(std::string_view s) {
  if (s == "foundation") return Profile::Foundation;
  if (s == "fine_tuned") return Profile::FineTuned;
  return std::nullopt;
}

inline constexpr std::string_view profile_name(Profile p) {
  return p == Profile::Foundation ? "foundation" : "fine_tuned";
}

namespace detail {

inline bool has_header_line(std::string_view text) {
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    for (auto h : {kDescriptionHeader, kLanguageHeader, kConstraintsHeader, kObjectiveHeader}) {
      if (line.starts_with(h)) return true;
    }
    start = end + 1;
  }
  return false;
}

}  // namespace detail

inline void validate(const PromptSpec& spec) {
  if (trim(spec.problem_description).empty()) {
    throw ValidationError("EMPTY_DESCRIPTION", "problem description is empty");
  }
  if (spec.exemplars.size() > spec.max_exemplars) {
    throw ValidationError("TOO_MANY_EXEMPLARS", std::to_string(spec.exemplars.size()) +
                                                    " exemplars exceed the maximum of " +
                                                    std::to_string(spec.max_exemplars));
  }
  if (detail::has_header_line(spec.problem_description) ||
      (spec.constraints && detail::has_header_line(*spec.constraints))) {
    throw ValidationError("RESERVED_HEADER", "text may not contain a line starting with a section header");
  }
  for (const auto& ex : spec.exemplars) {
    if (detail::has_header_line(ex.description) || detail::has_header_line(ex.code)) {
      throw ValidationError("RESERVED_HEADER", "exemplar may not contain a section header line");
    }
  }
}

// Example block as inserted between the preamble and the sections. Ends with
// a blank line so removing the block leaves the zero-shot text.
inline std::string render_exemplar(std::size_t index, const Exemplar& ex) {
  std::string out = "Example " + std::to_string(index) + ":\n";
  out += "Description: " + ex.description + "\n";
  out += "Code:\n" + ex.code;
  if (out.back() != '\n') out.push_back('\n');
  out += "\n";
  return out;
}

inline std::string build_prompt(const PromptSpec& spec) {
  validate(spec);
  std::string out(kPreamble);
  out += "\n\n";
  for (std::size_t i = 0; i < spec.exemplars.size(); ++i) out += render_exemplar(i + 1, spec.exemplars[i]);
  out += std::string(kDescriptionHeader) + " " + std::string(trim(spec.problem_description)) + "\n\n";
  out += std::string(kLanguageHeader) + " " + std::string(display_name(spec.language)) + "\n\n";
  const auto constraints = spec.constraints ? trim(*spec.constraints) : std::string_view{};
  out += std::string(kConstraintsHeader) + " " + std::string(constraints.empty() ? "None" : constraints) + "\n\n";
  out += std::string(kObjectiveHeader) + " " + std::string(kObjective) + "\n";
  return out;
}

// Fine-tuned profile: the training input format, dated `date`.
inline std::string build_fine_tuned_prompt(const PromptSpec& spec, Timestamp date) {
  validate(spec);
  return dataset::format_input(trim(spec.problem_description), spec.language, date);
}

inline std::string build(Profile profile, const PromptSpec& spec, Timestamp date) {
  return profile == Profile::Foundation ? build_prompt(spec) : build_fine_tuned_prompt(spec, date);
}

struct PromptSections {
  std::string description;
  std::string language;
  std::string constraints;
  std::string objective;
  std::size_t example_blocks = 0;
};

// Splits a prompt built by build_prompt back into its sections. Returns
// nullopt when the headers are missing or out of order.
inline std::optional<PromptSections> parse_prompt(std::string_view text) {
  const auto desc_head = std::string(kDescriptionHeader) + " ";
  const auto lang_head = "\n\n" + std::string(kLanguageHeader) + " ";
  const auto cons_head = "\n\n" + std::string(kConstraintsHeader) + " ";
  const auto obj_head = "\n\n" + std::string(kObjectiveHeader) + " ";

  auto d = text.find(desc_head);
  while (d != std::string_view::npos && d != 0 && text[d - 1] != '\n') d = text.find(desc_head, d + 1);
  if (d == std::string_view::npos) return std::nullopt;
  const auto l = text.find(lang_head, d);
  if (l == std::string_view::npos) return std::nullopt;
  const auto c = text.find(cons_head, l);
  if (c == std::string_view::npos) return std::nullopt;
  const auto o = text.find(obj_head, c);
  if (o == std::string_view::npos) return std::nullopt;

  PromptSections s;
  s.description = text.substr(d + desc_head.size(), l - d - desc_head.size());
  s.language = text.substr(l + lang_head.size(), c - l - lang_head.size());
  s.constraints = text.substr(c + cons_head.size(), o - c - cons_head.size());
  auto objective = text.substr(o + obj_head.size());
  if (!objective.empty() && objective.back() == '\n') objective.remove_suffix(1);
  s.objective = objective;

  const auto head = text.substr(0, d);
  for (std::size_t pos = 0; (pos = head.find("Example ", pos)) != std::string_view::npos; ++pos) {
    if (pos != 0 && head[pos - 1] != '\n') continue;
    auto rest = head.substr(pos + 8);
    std::size_t digits = 0;
    while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
    if (digits > 0 && rest.substr(digits).starts_with(":\n")) ++s.example_blocks;
  }
  return s;
}

// Deterministic few-shot selection: records of spec.language, excluding
// `exclude_id`, ordered by seeded_key(seed, id); the first k are used.
inline std::vector<Exemplar> select_exemplars(const std::vector<dataset::TrainingRecord>& pool,
                                              Language language, std::size_t k, std::uint64_t seed,
                                              std::optional<long long> exclude_id = std::nullopt) {
  if (k == 0) return {};
  std::vector<const dataset::TrainingRecord*> matching;
  for (const auto& r : pool) {
    if (r.language != language) continue;
    if (exclude_id && r.question_id == *exclude_id) continue;
    matching.push_back(&r);
  }
  if (matching.size() < k) {
    throw ValidationError("NOT_ENOUGH_EXEMPLARS", "requested " + std::to_string(k) + " exemplars but only " +
                                                      std::to_string(matching.size()) + " " +
                                                      std::string(display_name(language)) +
                                                      " records are available");
  }
  std::sort(matching.begin(), matching.end(), [&](auto* a, auto* b) {
    const auto ka = seeded_key(seed, static_cast<std::uint64_t>(a->question_id));
    const auto kb = seeded_key(seed, static_cast<std::uint64_t>(b->question_id));
    return ka != kb ? ka < kb : a->question_id < b->question_id;
  });
  std::vector<Exemplar> out;
  for (std::size_t i = 0; i < k; ++i) {
    out.push_back({dataset::description_from_input(matching[i]->input_text),
                   dataset::code_from_output(matching[i]->output_text)});
  }
  return out;
}

}  // namespace gencnippet::prompt
