#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "gencnippet/filter.hpp"
#include "support/fixtures.hpp"

using namespace gencnippet;
using namespace gencnippet::filter;

namespace {

CodeNeedModel zero_model() {
  CodeNeedModel m;
  m.feature_names = feature_names();
  m.weights.assign(m.feature_names.size(), 0.0);
  return m;
}

// needs_code follows the error lexicon: score ~0.993 with a hit, ~0.007 without.
CodeNeedModel lexicon_model() {
  CodeNeedModel m;
  m.feature_names = {"error_lexicon"};
  m.weights = {10.0};
  m.bias = -5.0;
  return m;
}

std::size_t index_of(std::string_view name) {
  const auto& names = feature_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

}  // namespace

TEST(Featurize, ErrorLexicon) {
  auto q = fixtures::question(1, Language::Java, 1, 0, "NullPointerException at line 5");
  EXPECT_EQ(featurize(q)[index_of("error_lexicon")], 1.0);
  q.prose = "what is a monad";
  EXPECT_EQ(featurize(q)[index_of("error_lexicon")], 0.0);
}

TEST(Featurize, OtherFeatures) {
  auto q = fixtures::question(1, Language::Python, 1, 0, "How do I call read_csv and toString here?");
  const auto f = featurize(q);
  EXPECT_EQ(f[index_of("how_to_interrogative")], 1.0);
  EXPECT_DOUBLE_EQ(f[index_of("api_identifier_log_count")], std::log1p(2.0));
  EXPECT_DOUBLE_EQ(f[index_of("prose_log_length")], std::log1p(static_cast<double>(q.prose.size())));
  EXPECT_EQ(f[index_of("tag_python")], 1.0);
  EXPECT_EQ(f[index_of("tag_java")], 0.0);
  EXPECT_EQ(featurize(q), featurize(q));
}

TEST(NeedsCode, LogisticOfZeroIsHalf) {
  const auto p = needs_code(fixtures::question(1, Language::Java, 1, 1), zero_model());
  EXPECT_DOUBLE_EQ(p.score, 0.5);
  EXPECT_TRUE(p.needs_code);
}

TEST(NeedsCode, HandSetWeights) {
  CodeNeedModel m;
  m.feature_names = {"error_lexicon"};
  m.weights = {2.0};
  m.bias = -1.0;
  const auto p = needs_code(fixtures::question(1, Language::Java, 1, 1, "it throws an exception"), m);
  EXPECT_NEAR(p.score, 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(p.score, 0.7311, 1e-4);
}

TEST(NeedsCode, Saturates) {
  CodeNeedModel m;
  m.feature_names = {"error_lexicon"};
  m.weights = {1e6};
  const auto p = needs_code(fixtures::question(1, Language::Java, 1, 1, "error"), m);
  EXPECT_DOUBLE_EQ(p.score, 1.0);
  m.weights = {-1e6};
  EXPECT_DOUBLE_EQ(needs_code(fixtures::question(1, Language::Java, 1, 1, "error"), m).score, 0.0);
}

TEST(Model, ValidationErrors) {
  auto m = zero_model();
  m.weights.pop_back();
  EXPECT_THROW(m.validate(), ConfigError);
  m = zero_model();
  m.threshold = 1.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m.threshold = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = zero_model();
  m.feature_names[0] = "shoe_size";
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(model_from_json(nlohmann::json{{"weights", {1}}}), ConfigError);
}

TEST(Model, ShippedParametersLoad) {
  const auto m = load_model(std::string(GENCNIPPET_SOURCE_DIR) + "/configs/code_need_model.json");
  EXPECT_EQ(m.feature_names, feature_names());
  EXPECT_DOUBLE_EQ(m.threshold, 0.5);
  const auto back = model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.weights, m.weights);
}

TEST(Gates, SpecExamples) {
  EXPECT_TRUE(apply_quality_gates(fixtures::question(1, Language::Java, 5, 1)).passed_quality);

  auto d = apply_quality_gates(fixtures::question(1, Language::Java, 0, 1));
  EXPECT_FALSE(d.passed_quality);
  EXPECT_EQ(d.reasons, std::vector<Reason>{Reason::NonPositiveScore});

  d = apply_quality_gates(fixtures::question(1, Language::Java, 3, 2));
  EXPECT_EQ(d.reasons, std::vector<Reason>{Reason::MultiSnippet});
  EXPECT_TRUE(apply_quality_gates(fixtures::question(1, Language::Java, 3, 2), {Mode::Training, true}).passed_quality);

  d = apply_quality_gates(fixtures::question(1, Language::Java, -2, 0));
  EXPECT_EQ(d.reasons, (std::vector<Reason>{Reason::NonPositiveScore, Reason::NoSnippet}));
}

TEST(Gates, GenerationModeWantsNoCode) {
  const GateOptions gen{Mode::Generation, false};
  EXPECT_TRUE(apply_quality_gates(fixtures::question(1, Language::Python, 2, 0), gen).passed_quality);
  EXPECT_EQ(apply_quality_gates(fixtures::question(1, Language::Python, 2, 1), gen).reasons,
            std::vector<Reason>{Reason::HasSnippet});
}

TEST(RunFilter, TenQuestionFixture) {
  // id, lang, score, blocks, prose -> expected selected
  struct Case {
    long long id;
    Language lang;
    int score;
    std::size_t blocks;
    const char* prose;
    bool selected;
  };
  const std::vector<Case> cases = {
      {1, Language::Java, 3, 1, "error on start", true},    {2, Language::Java, 0, 1, "error again", false},
      {3, Language::Java, 3, 2, "crash", false},            {4, Language::Java, 3, 1, "what is a monad", false},
      {5, Language::Java, 1, 0, "exception", false},        {6, Language::Python, 9, 1, "traceback here", true},
      {7, Language::Python, 1, 1, "segfault", true},        {8, Language::Python, -1, 1, "error", false},
      {9, Language::Python, 2, 1, "is this idiomatic", false}, {10, Language::Python, 4, 3, "it fails", false},
  };
  std::vector<QuestionPost> qs;
  for (const auto& c : cases) qs.push_back(fixtures::question(c.id, c.lang, c.score, c.blocks, c.prose));
  const auto r = run_filter(qs, lexicon_model());
  std::vector<long long> got, want;
  for (const auto& q : r.selected) got.push_back(q.id);
  for (const auto& c : cases) {
    if (c.selected) want.push_back(c.id);
  }
  EXPECT_EQ(got, want);
  EXPECT_EQ(r.summary[Language::Java], (ingest::StageCounts{4, 3, 1}));
  EXPECT_EQ(r.summary[Language::Python], (ingest::StageCounts{5, 4, 2}));
  EXPECT_EQ(r.decisions[3].reasons, std::vector<Reason>{Reason::NeedsCodeBelowThreshold});
}

TEST(RunFilter, EmptyInput) {
  const auto r = run_filter({}, zero_model());
  EXPECT_TRUE(r.selected.empty());
  EXPECT_TRUE(r.decisions.empty());
  EXPECT_EQ(r.summary.totals(), ingest::StageCounts{});
}

TEST(RunFilter, ThresholdNearOneRejectsEverything) {
  auto m = zero_model();
  m.threshold = 1.0 - 1e-9;
  std::vector<QuestionPost> qs;
  for (int i = 1; i <= 5; ++i) qs.push_back(fixtures::question(i, Language::Java, 3, 1));
  const auto r = run_filter(qs, m);
  EXPECT_TRUE(r.selected.empty());
  for (const auto& d : r.decisions) {
    ASSERT_FALSE(d.reasons.empty());
    EXPECT_EQ(d.reasons.front(), Reason::NeedsCodeBelowThreshold);
  }
}

class RunFilterProperties : public ::testing::Test {
 protected:
  std::vector<QuestionPost> random_questions(std::mt19937& rng, std::size_t n) {
    const std::vector<std::string> words = {"error", "how", "to", "parse", "readCsv", "monad", "exception",
                                            "how do i", "value", "snake_case", "list", "crash"};
    std::vector<QuestionPost> qs;
    for (std::size_t i = 0; i < n; ++i) {
      std::string prose;
      const auto len = 1 + rng() % 8;
      for (std::size_t w = 0; w < len; ++w) prose += words[rng() % words.size()] + " ";
      qs.push_back(fixtures::question(static_cast<long long>(i + 1), rng() % 2 ? Language::Java : Language::Python,
                                      static_cast<int>(rng() % 5) - 1, rng() % 3, prose));
    }
    return qs;
  }
};

TEST_F(RunFilterProperties, InvariantsHoldOnRandomInputs) {
  std::mt19937 rng(11);
  const auto model = load_model(std::string(GENCNIPPET_SOURCE_DIR) + "/configs/code_need_model.json");
  for (int trial = 0; trial < 50; ++trial) {
    const auto qs = random_questions(rng, 60);
    const auto r = run_filter(qs, model);
    ASSERT_EQ(r.decisions.size(), qs.size());
    std::size_t passed = 0;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const auto& d = r.decisions[i];
      EXPECT_EQ(d.question_id, qs[i].id);
      if (d.passed_quality) {
        EXPECT_TRUE(d.needs_code);
        EXPECT_TRUE(d.reasons.empty());
        ASSERT_LT(cursor, r.selected.size());
        EXPECT_EQ(r.selected[cursor++].id, qs[i].id);
        ++passed;
      }
      EXPECT_GE(d.need_score, 0.0);
      EXPECT_LE(d.need_score, 1.0);
    }
    EXPECT_EQ(passed, r.selected.size());
    for (const auto& q : r.selected) {
      EXPECT_GE(q.score, 1);
      EXPECT_EQ(q.code_blocks.size(), 1u);
    }
    const auto t = r.summary.totals();
    EXPECT_LE(t.final_selected, t.needing_code);
    EXPECT_LE(t.needing_code, t.with_code);
  }
}

TEST_F(RunFilterProperties, LoweringThresholdNeverShrinksSelection) {
  std::mt19937 rng(12);
  auto model = load_model(std::string(GENCNIPPET_SOURCE_DIR) + "/configs/code_need_model.json");
  for (int trial = 0; trial < 20; ++trial) {
    const auto qs = random_questions(rng, 80);
    std::set<long long> previous;
    for (double t : {0.95, 0.8, 0.6, 0.5, 0.3, 0.1, 0.01}) {
      model.threshold = t;
      std::set<long long> now;
      for (const auto& q : run_filter(qs, model).selected) now.insert(q.id);
      EXPECT_TRUE(std::includes(now.begin(), now.end(), previous.begin(), previous.end())) << t;
      previous = std::move(now);
    }
  }
}

TEST(RunFilter, DeterministicAcrossRuns) {
  std::vector<QuestionPost> qs;
  for (int i = 1; i <= 20; ++i) qs.push_back(fixtures::question(i, Language::Java, i % 3, i % 2, "error " + std::to_string(i)));
  const auto a = run_filter(qs, lexicon_model());
  const auto b = run_filter(qs, lexicon_model());
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t i = 0; i < a.decisions.size(); ++i) {
    EXPECT_EQ(to_json(a.decisions[i]), to_json(b.decisions[i]));
  }
}
