#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gencnippet/survey.hpp"

using namespace gencnippet;
using namespace gencnippet::survey;

namespace {

SurveyResponse respondent(std::string id, std::optional<NpsAnswer> nps = NpsAnswer::Neutral,
                          std::optional<double> years = 3.0) {
  SurveyResponse r;
  r.respondent_id = std::move(id);
  r.consent = true;
  r.prerequisites_met = true;
  r.nps_answer = nps;
  r.demographics.experience_years = years;
  return r;
}

std::vector<SurveyResponse> multiset(std::initializer_list<std::pair<NpsAnswer, int>> counts) {
  std::vector<SurveyResponse> out;
  for (const auto& [a, n] : counts) {
    for (int i = 0; i < n; ++i) out.push_back(respondent("r" + std::to_string(out.size()), a));
  }
  return out;
}

}  // namespace

TEST(Wnps, Examples) {
  EXPECT_EQ(wnps(multiset({{NpsAnswer::Definitely, 7}})), 2.0);
  EXPECT_EQ(wnps(multiset({{NpsAnswer::Definitely, 3}, {NpsAnswer::ProbablyNot, 1}})), 1.25);
  EXPECT_EQ(wnps(multiset({{NpsAnswer::Definitely, 4}, {NpsAnswer::DefinitelyNot, 4}})), 0.0);
}

TEST(Wnps, UndefinedWithoutAnswers) {
  try {
    wnps({respondent("a", std::nullopt)});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "NO_NPS_DATA");
  }
  EXPECT_THROW(wnps({}), ValidationError);
}

TEST(Wnps, SkipsUnansweredRespondents) {
  auto rs = multiset({{NpsAnswer::Probably, 2}});
  rs.push_back(respondent("x", std::nullopt));
  EXPECT_EQ(wnps(rs), 1.0);
}

TEST(Wnps, BoundAndNeutralContraction) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<SurveyResponse> rs;
    const auto n = 1 + rng() % 30;
    for (std::size_t i = 0; i < n; ++i) rs.push_back(respondent(std::to_string(i), kNpsAnswers[rng() % 5]));
    const double w = wnps(rs);
    EXPECT_GE(w, -2.0);
    EXPECT_LE(w, 2.0);
    const bool all_top = std::all_of(rs.begin(), rs.end(), [](auto& r) { return r.nps_answer == NpsAnswer::Definitely; });
    const bool all_bottom =
        std::all_of(rs.begin(), rs.end(), [](auto& r) { return r.nps_answer == NpsAnswer::DefinitelyNot; });
    EXPECT_EQ(w == 2.0, all_top);
    EXPECT_EQ(w == -2.0, all_bottom);

    rs.push_back(respondent("neutral", NpsAnswer::Neutral));
    const double after = wnps(rs);
    if (w == 0.0) EXPECT_EQ(after, 0.0);
    else EXPECT_LT(std::abs(after), std::abs(w));
  }
}

TEST(Nps, ParseLabels) {
  EXPECT_EQ(parse_nps("Definitely"), NpsAnswer::Definitely);
  EXPECT_EQ(parse_nps("probably not"), NpsAnswer::ProbablyNot);
  EXPECT_EQ(parse_nps("DefinitelyNot"), NpsAnswer::DefinitelyNot);
  EXPECT_FALSE(parse_nps("maybe"));
}

TEST(Validate, ExclusionReasons) {
  auto no_consent = respondent("a");
  no_consent.consent = false;
  auto no_prereq = respondent("b");
  no_prereq.prerequisites_met = false;
  auto bad_answer = respondent("c");
  bad_answer.utility_items["clarity"] = "Kind of";
  auto unknown_q = respondent("d");
  unknown_q.ease_items["favourite_colour"] = "Blue";
  auto ok = respondent("e");
  ok.utility_items["clarity"] = "Agree";

  const auto v = validate_responses(std::vector<SurveyResponse>{no_consent, no_prereq, bad_answer, unknown_q, ok});
  ASSERT_EQ(v.included.size(), 1u);
  EXPECT_EQ(v.included[0].respondent_id, "e");
  ASSERT_EQ(v.excluded.size(), 4u);
  EXPECT_EQ(v.excluded[0].reason, ExclusionReason::NoConsent);
  EXPECT_EQ(v.excluded[1].reason, ExclusionReason::PrereqFail);
  EXPECT_EQ(v.excluded[2].reason, ExclusionReason::InvalidAnswer);
  EXPECT_EQ(v.excluded[3].reason, ExclusionReason::InvalidAnswer);
  EXPECT_EQ(reason_code(v.excluded[0].reason), "NO_CONSENT");
}

TEST(Validate, PartitionsJsonlInput) {
  std::istringstream in(
      "{\"respondent_id\":\"1\",\"consent\":true,\"prerequisites_met\":true,\"nps_answer\":\"Probably\"}\n"
      "not json\n"
      "{\"respondent_id\":\"3\",\"consent\":true,\"prerequisites_met\":true,\"nps_answer\":\"Sometimes\"}\n"
      "{\"respondent_id\":\"4\",\"consent\":false}\n");
  const auto raw = read_responses(in);
  ASSERT_EQ(raw.size(), 4u);
  const auto v = validate_responses(raw);
  EXPECT_EQ(v.included.size() + v.excluded.size(), raw.size());
  EXPECT_EQ(v.included.size(), 1u);
  // Undecodable lines carry no consent flag and are excluded on it.
  EXPECT_EQ(v.excluded[0].respondent_id, "line-2");
  EXPECT_EQ(v.excluded[1].reason, ExclusionReason::InvalidAnswer);
}

TEST(Summary, FiveResponseHandTally) {
  std::vector<SurveyResponse> rs = {respondent("1", NpsAnswer::Definitely, 1), respondent("2", NpsAnswer::Probably, 4),
                                    respondent("3", NpsAnswer::Probably, 12), respondent("4", NpsAnswer::Neutral, 8),
                                    respondent("5", std::nullopt, std::nullopt)};
  rs[0].utility_items["time_saved"] = "Agree";
  rs[1].utility_items["time_saved"] = "Agree";
  rs[2].utility_items["time_saved"] = "Strongly agree";
  rs[0].ease_items["install_ease"] = "Easy";
  rs[4].open_texts["improvements"] = "Show more context";
  rs[3].open_texts["improvements"] = "   ";

  const auto rep = summarize_survey(rs);
  EXPECT_EQ(rep.included, 5u);
  EXPECT_EQ(rep.wnps, 1.0);  // (2 + 1 + 1 + 0) / 4
  const auto& ts = rep.frequencies.at("time_saved");
  EXPECT_EQ(ts[0], (std::pair<std::string, std::size_t>{"Strongly agree", 1}));
  EXPECT_EQ(ts[1], (std::pair<std::string, std::size_t>{"Agree", 2}));
  EXPECT_EQ(rep.frequencies.at("install_ease")[1].second, 1u);
  EXPECT_EQ(rep.frequencies.at("recommend")[1].second, 2u);
  const auto& exp = rep.demographics.at("experience");
  EXPECT_EQ(exp, (Frequency{{"<2 years", 1}, {"2-5 years", 1}, {"6-10 years", 1}, {">10 years", 1}, {"unknown", 1}}));
  ASSERT_EQ(rep.open_texts.size(), 1u);
  EXPECT_EQ(rep.open_texts[0].second, "Show more context");

  // Cross-tab row sums are the bracket marginals of those who answered.
  for (const auto& t : rep.cross_tabs) {
    const auto& f = rep.frequencies.at(t.question_id);
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
      std::size_t col = 0;
      for (const auto& row : t.counts) col += row[j];
      EXPECT_EQ(col, f[j].second) << t.question_id << " " << t.columns[j];
    }
  }
}

TEST(Summary, EmptyHasNoDataMarkers) {
  const auto rep = summarize_survey({});
  EXPECT_FALSE(rep.wnps);
  EXPECT_EQ(to_json(rep)["wnps"], "no data");
  EXPECT_NE(render_survey(rep).find("no data"), std::string::npos);
}

TEST(CrossTab, ChiSquareTwoByTwo) {
  std::vector<SurveyResponse> rs;
  for (int i = 0; i < 3; ++i) rs.push_back(respondent("a" + std::to_string(i), NpsAnswer::Definitely, 1));
  rs.push_back(respondent("b", NpsAnswer::Probably, 1));
  rs.push_back(respondent("c", NpsAnswer::Definitely, 8));
  for (int i = 0; i < 3; ++i) rs.push_back(respondent("d" + std::to_string(i), NpsAnswer::Probably, 8));
  const auto rep = summarize_survey(rs);
  const auto& t = rep.cross_tabs.front();
  EXPECT_EQ(t.question_id, "recommend");
  EXPECT_NEAR(t.chi_square, 2.0, 1e-12);
  EXPECT_EQ(t.degrees_of_freedom, 1);
  ASSERT_TRUE(t.p_value);
  // df = 1: p = erfc(sqrt(chi2 / 2)).
  EXPECT_NEAR(*t.p_value, std::erfc(1.0), 1e-12);
}

TEST(Summary, Deterministic) {
  auto rs = multiset({{NpsAnswer::Definitely, 2}, {NpsAnswer::ProbablyNot, 3}});
  EXPECT_EQ(to_json(summarize_survey(rs)).dump(), to_json(summarize_survey(rs)).dump());
}
