#pragma once

// Usability-survey analytics: response validation, the weighted net
// promoter score and frequency / cross-tab reports.

#include <algorithm>
#include <array>
#include <functional>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "gencnippet/common.hpp"

namespace gencnippet::survey {

enum class NpsAnswer { Definitely, Probably, Neutral, ProbablyNot, DefinitelyNot };

inline constexpr std::array<NpsAnswer, 5> kNpsAnswers = {NpsAnswer::Definitely, NpsAnswer::Probably,
                                                         NpsAnswer::Neutral, NpsAnswer::ProbablyNot,
                                                         NpsAnswer::DefinitelyNot};

// Fixed weights: 2, 1, 0, -1, -2.
inline constexpr int nps_score(NpsAnswer a) {
  switch (a) {
    case NpsAnswer::Definitely: return 2;
    case NpsAnswer::Probably: return 1;
    case NpsAnswer::Neutral: return 0;
    case NpsAnswer::ProbablyNot: return -1;
    case NpsAnswer::DefinitelyNot: return -2;
  }
  return 0;
}

inline constexpr std::string_view nps_label(NpsAnswer a) {
  switch (a) {
    case NpsAnswer::Definitely: return "Definitely";
    case NpsAnswer::Probably: return "Probably";
    case NpsAnswer::Neutral: return "Neutral";
    case NpsAnswer::ProbablyNot: return "Probably not";
    case NpsAnswer::DefinitelyNot: return "Definitely not";
  }
  return "";
}

inline std::optional<NpsAnswer> parse_nps(std::string_view s) {
  const auto lower = to_lower(s);
  for (auto a : kNpsAnswers) {
    auto label = to_lower(nps_label(a));
    auto compact = label;
    std::erase(compact, ' ');
    if (lower == label || lower == compact) return a;
  }
  return std::nullopt;
}

// A closed-choice question and its allowed answers, in display order.
struct Question {
  std::string id;
  std::string section;
  std::vector<std::string> options;
};

inline const std::vector<std::string>& agreement_scale() {
  static const std::vector<std::string> kScale{"Strongly agree", "Agree", "Neutral", "Disagree",
                                               "Strongly disagree"};
  return kScale;
}

inline const std::vector<Question>& ease_questions() {
  static const std::vector<Question> kQuestions{
      {"install_ease", "ease", {"Very easy", "Easy", "Neutral", "Difficult", "Very difficult"}},
      {"technical_issues", "ease", {"No issues", "Minor issues", "Moderate issues", "Major issues"}},
      {"response_time", "ease", {"Very fast", "Fast", "Acceptable", "Slow", "Very slow"}},
  };
  return kQuestions;
}

inline const std::vector<Question>& utility_questions() {
  static const std::vector<Question> kQuestions{
      {"time_saved", "utility", agreement_scale()},
      {"relevance", "utility", agreement_scale()},
      {"clarity", "utility", agreement_scale()},
      {"confidence", "utility", agreement_scale()},
  };
  return kQuestions;
}

struct Demographics {
  std::optional<double> experience_years;
  std::string profession;
  std::string country;
  std::string so_profile_opt;
};

struct SurveyResponse {
  std::string respondent_id;
  bool consent = false;
  bool prerequisites_met = false;
  Demographics demographics;
  std::map<std::string, std::string> ease_items;
  std::optional<NpsAnswer> nps_answer;
  std::map<std::string, std::string> utility_items;
  std::map<std::string, std::string> open_texts;
};

enum class ExclusionReason { NoConsent, PrereqFail, InvalidAnswer };

inline constexpr std::string_view reason_code(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::NoConsent: return "NO_CONSENT";
    case ExclusionReason::PrereqFail: return "PREREQ_FAIL";
    case ExclusionReason::InvalidAnswer: return "INVALID_ANSWER";
  }
  return "";
}

// A raw line: either a decoded response or the reason it failed to decode.
struct RawResponse {
  SurveyResponse response;
  std::optional<std::string> decode_error;
};

inline RawResponse response_from_json(const nlohmann::json& j) {
  RawResponse raw;
  auto& r = raw.response;
  try {
    r.respondent_id = j.at("respondent_id").is_string() ? j["respondent_id"].get<std::string>()
                                                         : j["respondent_id"].dump();
    r.consent = j.value("consent", false);
    r.prerequisites_met = j.value("prerequisites_met", false);
    if (j.contains("demographics")) {
      const auto& d = j["demographics"];
      if (d.contains("experience_years") && !d["experience_years"].is_null()) {
        r.demographics.experience_years = d["experience_years"].get<double>();
      }
      r.demographics.profession = d.value("profession", "");
      r.demographics.country = d.value("country", "");
      r.demographics.so_profile_opt = d.value("so_profile_opt", "");
    }
    r.ease_items = j.value("ease_items", std::map<std::string, std::string>{});
    r.utility_items = j.value("utility_items", std::map<std::string, std::string>{});
    r.open_texts = j.value("open_texts", std::map<std::string, std::string>{});
    if (j.contains("nps_answer") && !j["nps_answer"].is_null()) {
      const auto s = j["nps_answer"].get<std::string>();
      r.nps_answer = parse_nps(s);
      if (!r.nps_answer) raw.decode_error = "nps_answer '" + s + "' is not a valid choice";
    }
  } catch (const nlohmann::json::exception& e) {
    raw.decode_error = e.what();
  }
  return raw;
}

inline std::vector<RawResponse> read_responses(std::istream& in) {
  std::vector<RawResponse> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(response_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      RawResponse bad;
      bad.response.respondent_id = "line-" + std::to_string(line_no);
      bad.decode_error = e.what();
      out.push_back(std::move(bad));
    }
  }
  return out;
}

struct Excluded {
  std::string respondent_id;
  ExclusionReason reason;
  std::string detail;
};

struct Validation {
  std::vector<SurveyResponse> included;
  std::vector<Excluded> excluded;
};

namespace detail {

inline std::optional<std::string> check_answers(const std::map<std::string, std::string>& answers,
                                                const std::vector<Question>& questions) {
  for (const auto& [id, answer] : answers) {
    auto q = std::find_if(questions.begin(), questions.end(), [&](const Question& x) { return x.id == id; });
    if (q == questions.end()) return "unknown question '" + id + "'";
    if (std::find(q->options.begin(), q->options.end(), answer) == q->options.end()) {
      return "'" + answer + "' is not a choice for " + id;
    }
  }
  return std::nullopt;
}

}  // namespace detail

// Consent first, then prerequisites, then closed-set membership.
inline Validation validate_responses(const std::vector<RawResponse>& raw) {
  Validation v;
  for (const auto& item : raw) {
    const auto& r = item.response;
    if (!r.consent) {
      v.excluded.push_back({r.respondent_id, ExclusionReason::NoConsent, "consent not given"});
    } else if (!r.prerequisites_met) {
      v.excluded.push_back({r.respondent_id, ExclusionReason::PrereqFail, "prerequisites not met"});
    } else if (item.decode_error) {
      v.excluded.push_back({r.respondent_id, ExclusionReason::InvalidAnswer, *item.decode_error});
    } else if (auto bad = detail::check_answers(r.ease_items, ease_questions())) {
      v.excluded.push_back({r.respondent_id, ExclusionReason::InvalidAnswer, *bad});
    } else if (auto bad2 = detail::check_answers(r.utility_items, utility_questions())) {
      v.excluded.push_back({r.respondent_id, ExclusionReason::InvalidAnswer, *bad2});
    } else {
      v.included.push_back(r);
    }
  }
  return v;
}

inline Validation validate_responses(const std::vector<SurveyResponse>& responses) {
  std::vector<RawResponse> raw;
  raw.reserve(responses.size());
  for (const auto& r : responses) raw.push_back({r, std::nullopt});
  return validate_responses(raw);
}

// Sum of weight x count over the respondents who answered the item, divided
// by their number. Callers pass the included (validated) responses.
inline double wnps(const std::vector<SurveyResponse>& responses) {
  long long sum = 0;
  long long n = 0;
  for (const auto& r : responses) {
    if (!r.nps_answer) continue;
    sum += nps_score(*r.nps_answer);
    ++n;
  }
  if (n == 0) throw ValidationError("NO_NPS_DATA", "WNPS is undefined without answered responses");
  return static_cast<double>(sum) / static_cast<double>(n);
}

// ------------------------------------------------------------------
// Report
// ------------------------------------------------------------------

inline const std::vector<std::string>& experience_brackets() {
  static const std::vector<std::string> kBrackets{"<2 years", "2-5 years", "6-10 years", ">10 years",
                                                  "unknown"};
  return kBrackets;
}

inline std::string experience_bracket(const std::optional<double>& years) {
  if (!years) return "unknown";
  if (*years < 2) return "<2 years";
  if (*years <= 5) return "2-5 years";
  if (*years <= 10) return "6-10 years";
  return ">10 years";
}

using Frequency = std::vector<std::pair<std::string, std::size_t>>;  // option order preserved

struct CrossTab {
  std::string question_id;
  std::vector<std::string> rows;     // experience brackets
  std::vector<std::string> columns;  // answer options
  std::vector<std::vector<std::size_t>> counts;
  double chi_square = 0.0;
  int degrees_of_freedom = 0;
  std::optional<double> p_value;  // exploratory
};

struct SurveyReport {
  std::size_t included = 0;
  std::map<std::string, Frequency> frequencies;  // question id -> counts
  std::optional<double> wnps;
  std::map<std::string, Frequency> demographics;
  std::vector<CrossTab> cross_tabs;
  std::vector<std::pair<std::string, std::string>> open_texts;  // (question id, text)
};

inline CrossTab cross_tab(const std::vector<SurveyResponse>& rs, const std::string& question_id,
                          const std::vector<std::string>& columns,
                          const std::function<std::optional<std::string>(const SurveyResponse&)>& answer_of) {
  CrossTab t;
  t.question_id = question_id;
  t.rows = experience_brackets();
  t.columns = columns;
  t.counts.assign(t.rows.size(), std::vector<std::size_t>(columns.size(), 0));
  for (const auto& r : rs) {
    const auto a = answer_of(r);
    if (!a) continue;
    const auto row = static_cast<std::size_t>(
        std::find(t.rows.begin(), t.rows.end(), experience_bracket(r.demographics.experience_years)) - t.rows.begin());
    const auto col = static_cast<std::size_t>(std::find(columns.begin(), columns.end(), *a) - columns.begin());
    if (col < columns.size()) ++t.counts[row][col];
  }

  // Pearson chi-square over non-empty rows and columns.
  std::vector<double> row_sum(t.rows.size(), 0.0), col_sum(columns.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      row_sum[i] += static_cast<double>(t.counts[i][j]);
      col_sum[j] += static_cast<double>(t.counts[i][j]);
      total += static_cast<double>(t.counts[i][j]);
    }
  }
  const auto nonzero = [](const std::vector<double>& v) {
    return static_cast<int>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0; }));
  };
  const int r = nonzero(row_sum), c = nonzero(col_sum);
  if (total > 0 && r > 1 && c > 1) {
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      for (std::size_t j = 0; j < columns.size(); ++j) {
        if (row_sum[i] == 0 || col_sum[j] == 0) continue;
        const double expected = row_sum[i] * col_sum[j] / total;
        const double diff = static_cast<double>(t.counts[i][j]) - expected;
        t.chi_square += diff * diff / expected;
      }
    }
    t.degrees_of_freedom = (r - 1) * (c - 1);
    t.p_value = boost::math::gamma_q(t.degrees_of_freedom / 2.0, t.chi_square / 2.0);
  }
  return t;
}

inline SurveyReport summarize_survey(const std::vector<SurveyResponse>& included) {
  SurveyReport rep;
  rep.included = included.size();

  auto tally = [&](const Question& q, const std::map<std::string, std::string> SurveyResponse::*field) {
    Frequency f;
    for (const auto& opt : q.options) {
      const auto n = std::count_if(included.begin(), included.end(), [&](const SurveyResponse& r) {
        auto it = (r.*field).find(q.id);
        return it != (r.*field).end() && it->second == opt;
      });
      f.emplace_back(opt, static_cast<std::size_t>(n));
    }
    rep.frequencies[q.id] = std::move(f);
  };
  for (const auto& q : ease_questions()) tally(q, &SurveyResponse::ease_items);
  for (const auto& q : utility_questions()) tally(q, &SurveyResponse::utility_items);

  std::vector<std::string> nps_labels;
  Frequency nps;
  for (auto a : kNpsAnswers) {
    nps_labels.emplace_back(nps_label(a));
    nps.emplace_back(std::string(nps_label(a)),
                     static_cast<std::size_t>(std::count_if(included.begin(), included.end(), [&](const SurveyResponse& r) {
                       return r.nps_answer == a;
                     })));
  }
  rep.frequencies["recommend"] = std::move(nps);

  const bool any_nps = std::any_of(included.begin(), included.end(), [](const auto& r) { return r.nps_answer.has_value(); });
  if (any_nps) rep.wnps = wnps(included);

  std::map<std::string, std::size_t> experience, profession, country;
  for (const auto& r : included) {
    ++experience[experience_bracket(r.demographics.experience_years)];
    ++profession[r.demographics.profession.empty() ? "unknown" : r.demographics.profession];
    ++country[r.demographics.country.empty() ? "unknown" : r.demographics.country];
  }
  Frequency exp_freq;
  for (const auto& b : experience_brackets()) exp_freq.emplace_back(b, experience[b]);
  rep.demographics["experience"] = std::move(exp_freq);
  rep.demographics["profession"] = Frequency(profession.begin(), profession.end());
  rep.demographics["country"] = Frequency(country.begin(), country.end());

  rep.cross_tabs.push_back(cross_tab(included, "recommend", nps_labels, [](const SurveyResponse& r) {
    return r.nps_answer ? std::optional<std::string>(nps_label(*r.nps_answer)) : std::nullopt;
  }));
  for (const auto& q : utility_questions()) {
    rep.cross_tabs.push_back(cross_tab(included, q.id, q.options, [&](const SurveyResponse& r) -> std::optional<std::string> {
      auto it = r.utility_items.find(q.id);
      if (it == r.utility_items.end()) return std::nullopt;
      return it->second;
    }));
  }

  for (const auto& r : included) {
    for (const auto& [qid, text] : r.open_texts) {
      if (!trim(text).empty()) rep.open_texts.emplace_back(qid, text);
    }
  }
  return rep;
}

inline nlohmann::ordered_json to_json(const SurveyReport& rep) {
  nlohmann::ordered_json j;
  j["included"] = rep.included;
  j["wnps"] = rep.wnps ? nlohmann::ordered_json(*rep.wnps) : nlohmann::ordered_json("no data");
  auto freq = [](const Frequency& f) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (const auto& [k, v] : f) o[k] = v;
    return o;
  };
  for (const auto& [qid, f] : rep.frequencies) j["frequencies"][qid] = freq(f);
  for (const auto& [name, f] : rep.demographics) j["demographics"][name] = freq(f);
  auto& tabs = j["cross_tabs"] = nlohmann::ordered_json::array();
  for (const auto& t : rep.cross_tabs) {
    nlohmann::ordered_json o;
    o["question_id"] = t.question_id;
    o["rows"] = t.rows;
    o["columns"] = t.columns;
    o["counts"] = t.counts;
    o["chi_square"] = t.chi_square;
    o["degrees_of_freedom"] = t.degrees_of_freedom;
    o["p_value"] = t.p_value ? nlohmann::ordered_json(*t.p_value) : nlohmann::ordered_json(nullptr);
    tabs.push_back(std::move(o));
  }
  return j;
}

inline std::string render_survey(const SurveyReport& rep, const Validation* validation = nullptr) {
  std::ostringstream os;
  os << "Included responses: " << rep.included << '\n';
  if (validation) {
    std::map<std::string, std::size_t> by_reason;
    for (const auto& e : validation->excluded) ++by_reason[std::string(reason_code(e.reason))];
    os << "Excluded responses: " << validation->excluded.size();
    for (const auto& [k, v] : by_reason) os << "  " << k << "=" << v;
    os << '\n';
  }
  if (rep.included == 0) {
    os << "\nno data\n";
    return os.str();
  }
  char buf[32];
  if (rep.wnps) {
    std::snprintf(buf, sizeof buf, "%.3f", *rep.wnps);
    os << "WNPS: " << buf << '\n';
  } else {
    os << "WNPS: no data\n";
  }
  for (const auto& [qid, f] : rep.frequencies) {
    os << '\n' << qid << '\n';
    std::size_t w = 0;
    for (const auto& [k, v] : f) w = std::max(w, k.size());
    for (const auto& [k, v] : f) os << "  " << k << std::string(w - k.size(), ' ') << "  " << v << '\n';
  }
  for (const auto& t : rep.cross_tabs) {
    os << "\ncross-tab experience x " << t.question_id;
    if (t.p_value) {
      std::snprintf(buf, sizeof buf, "%.3f", t.chi_square);
      os << "  (chi2=" << buf << ", df=" << t.degrees_of_freedom;
      std::snprintf(buf, sizeof buf, "%.4f", *t.p_value);
      os << ", p=" << buf << ", exploratory)";
    }
    os << '\n';
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      os << "  " << t.rows[i] << std::string(12 - std::min<std::size_t>(12, t.rows[i].size()), ' ');
      for (auto c : t.counts[i]) os << ' ' << c;
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace gencnippet::survey
