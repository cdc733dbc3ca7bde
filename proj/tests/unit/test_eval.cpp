#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gencnippet/eval.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace gencnippet;
using namespace gencnippet::eval;

namespace {

TokenSequence toks(std::string_view s) { return tokenize_code(s); }

std::shared_ptr<const Embedder> one_hot_for(const std::vector<std::string>& vocab) {
  return std::make_shared<OneHotEmbedder>(vocab);
}

}  // namespace

TEST(Tokenizer, SplitsCode) {
  EXPECT_EQ(toks("x += foo(3.5)->y;"),
            (TokenSequence{"x", "+=", "foo", "(", "3.5", ")", "->", "y", ";"}));
  EXPECT_EQ(toks("a>>=b === c"), (TokenSequence{"a", ">>=", "b", "===", "c"}));
  EXPECT_TRUE(toks(" \n\t").empty());
}

TEST(Bleu, WorkedExamples) {
  EXPECT_DOUBLE_EQ(bleu(toks("a b c d"), toks("a b c d")), 1.0);
  EXPECT_DOUBLE_EQ(bleu(toks("x y"), toks("a b"), 4, Smoothing::None), 0.0);
  const auto d = bleu_details(toks("the cat sat"), toks("the cat sat down"), 2, Smoothing::None);
  EXPECT_DOUBLE_EQ(d.precisions[0], 1.0);
  EXPECT_DOUBLE_EQ(d.precisions[1], 1.0);
  EXPECT_NEAR(d.brevity_penalty, std::exp(1.0 - 4.0 / 3.0), 1e-15);
  EXPECT_NEAR(d.score, 0.716531, 1e-6);
}

TEST(Bleu, EmptyCandidateFlagged) {
  const auto d = bleu_details({}, toks("a"));
  EXPECT_TRUE(d.empty_candidate);
  EXPECT_EQ(d.score, 0.0);
  EXPECT_THROW(bleu(toks("a"), {}), ValidationError);
}

TEST(Bleu, MatchesBruteForceOracle) {
  std::mt19937 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto c = oracles::random_tokens(rng, 1, 12, 5);
    const auto r = oracles::random_tokens(rng, 1, 12, 5);
    for (int n : {1, 2, 4}) {
      EXPECT_NEAR(bleu(c, r, n, Smoothing::None), oracles::bleu(c, r, n, 0.0), 1e-9);
      EXPECT_NEAR(bleu(c, r, n, Smoothing::AddEpsilon), oracles::bleu(c, r, n, kSmoothingEpsilon), 1e-9);
    }
  }
}

TEST(RougeL, WorkedExamples) {
  const auto s = rouge_l(toks("a c d"), toks("a b c d"));
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.recall, 0.75);
  EXPECT_NEAR(s.f1, 0.857143, 1e-6);
  const auto same = rouge_l(toks("p q"), toks("p q"));
  EXPECT_DOUBLE_EQ(same.f1, 1.0);
  const auto none = rouge_l(toks("p q"), toks("r s"));
  EXPECT_EQ(none.precision + none.recall + none.f1, 0.0);
}

TEST(RougeL, MatchesTableOracle) {
  std::mt19937 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto c = oracles::random_tokens(rng, 1, 12, 5);
    const auto r = oracles::random_tokens(rng, 1, 12, 5);
    const auto lcs = oracles::lcs(c, r);
    EXPECT_EQ(lcs_length(c, r), lcs);
    const auto s = rouge_l(c, r);
    EXPECT_NEAR(s.precision, static_cast<double>(lcs) / c.size(), 1e-12);
    EXPECT_NEAR(s.recall, static_cast<double>(lcs) / r.size(), 1e-12);
    EXPECT_NEAR(s.f1, harmonic_mean(s.precision, s.recall), 1e-15);
  }
}

TEST(Embedding, OneHotDegeneratesToUnigramOverlap) {
  std::mt19937 rng(3);
  const auto embedder = OneHotEmbedder({"a", "b", "c", "d", "e"});
  for (int i = 0; i < 100; ++i) {
    const auto c = oracles::random_tokens(rng, 1, 12, 5);
    const auto r = oracles::random_tokens(rng, 1, 12, 5);
    const auto s = embedding_score(c, r, embedder);
    const auto o = oracles::unigram_overlap(c, r);
    EXPECT_EQ(s.precision, o.precision);
    EXPECT_EQ(s.recall, o.recall);
  }
}

TEST(Embedding, OrthogonalAndIdentical) {
  const OneHotEmbedder e({"a", "b", "c", "d"});
  const auto zero = embedding_score({"a", "b"}, {"c", "d"}, e);
  EXPECT_EQ(zero.precision + zero.recall + zero.f1, 0.0);
  const HashingEmbedder h;
  const auto same = embedding_score(toks("int x = y;"), toks("int x = y;"), h);
  EXPECT_NEAR(same.f1, 1.0, 1e-12);
}

TEST(Embedding, HandTwoDimensionalFixture) {
  // Candidate a b c, reference a d with a=(1,0) b=(0,1) c=(1,1) d=(0.6,0.8).
  const FunctionEmbedder e([](const std::string& t) -> std::vector<double> {
    if (t == "a") return {1, 0};
    if (t == "b") return {0, 1};
    if (t == "c") return {1, 1};
    return {0.6, 0.8};
  });
  const auto s = embedding_score({"a", "b", "c"}, {"a", "d"}, e);
  const double cd = 1.4 / std::sqrt(2.0);
  EXPECT_NEAR(s.precision, (1.0 + 0.8 + cd) / 3.0, 1e-12);
  EXPECT_NEAR(s.recall, (1.0 + cd) / 2.0, 1e-12);
  EXPECT_NEAR(s.f1, harmonic_mean(s.precision, s.recall), 1e-15);
}

TEST(Embedding, NegativeCosineClampedToZero) {
  const FunctionEmbedder e([](const std::string& t) -> std::vector<double> {
    return t == "p" ? std::vector<double>{1, 0} : std::vector<double>{-1, 0};
  });
  EXPECT_EQ(embedding_score({"p"}, {"n"}, e).f1, 0.0);
}

TEST(Metrics, BoundsAndIdentityOnRandomCode) {
  std::mt19937 rng(4);
  const std::vector<std::string> pieces = {"x", "=", "foo", "(", ")", ";", "1", "return", "if", "{", "}"};
  const HashingEmbedder h;
  for (int i = 0; i < 100; ++i) {
    std::string a, b;
    for (int k = 0; k < 1 + static_cast<int>(rng() % 15); ++k) a += pieces[rng() % pieces.size()] + " ";
    for (int k = 0; k < 1 + static_cast<int>(rng() % 15); ++k) b += pieces[rng() % pieces.size()] + " ";
    const auto ta = toks(a), tb = toks(b);
    for (double v : {bleu(ta, tb), rouge_l(ta, tb).f1, embedding_score(ta, tb, h).f1}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    EXPECT_NEAR(bleu(ta, ta), 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(rouge_l(ta, ta).f1, 1.0);
    EXPECT_NEAR(embedding_score(ta, ta, h).f1, 1.0, 1e-12);
  }
}

TEST(SampleSize, Cochran) {
  EXPECT_EQ(required_sample_size(0.95, 0.05), 385);
  const auto corrected = required_sample_size(0.95, 0.05, 385);
  EXPECT_LT(corrected, 385);
  EXPECT_GE(corrected, 193);
  EXPECT_EQ(required_sample_size(0.95, 0.5), 4);
  EXPECT_EQ(required_sample_size(0.99, 0.05), 664);
  try {
    required_sample_size(0.8, 0.05);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), "BAD_CONFIDENCE");
  }
  EXPECT_THROW(required_sample_size(0.95, 0.0), ValidationError);
}

TEST(SampleSize, OverrideToFourHundred) {
  const auto p = plan_manual_review(0.95, 0.05, std::nullopt, 400);
  EXPECT_EQ(p.formula, 385);
  EXPECT_EQ(p.chosen, 400);
  EXPECT_TRUE(p.overridden);
  EXPECT_THROW(plan_manual_review(0.95, 0.05, std::nullopt, 100), ValidationError);
}

TEST(Likert, AllFives) {
  const auto s = aggregate_likert({{"s1", "r1", 5, 5}, {"s1", "r2", 5, 5}});
  EXPECT_EQ(s.clarity.mean, 5.0);
  EXPECT_EQ(s.clarity.exact_agreement, 1.0);
}

TEST(Likert, OneApart) {
  const auto s = aggregate_likert({{"s1", "r1", 4, 3}, {"s1", "r2", 5, 3}});
  EXPECT_EQ(s.clarity.exact_agreement, 0.0);
  EXPECT_EQ(s.clarity.within_one_agreement, 1.0);
  EXPECT_EQ(s.relevance.exact_agreement, 1.0);
}

TEST(Likert, SixRatingHandTally) {
  const auto s = aggregate_likert({{"s1", "r1", 4, 2},
                                   {"s1", "r2", 5, 5},
                                   {"s2", "r1", 3, 4},
                                   {"s2", "r2", 3, 4},
                                   {"s3", "r1", 2, 1},
                                   {"s4", "r2", 5, 3}});
  EXPECT_EQ(s.clarity.count, 6u);
  EXPECT_NEAR(*s.clarity.mean, 22.0 / 6.0, 1e-12);
  EXPECT_EQ(s.clarity.median, 3.5);
  EXPECT_EQ(s.clarity.distribution, (std::array<std::size_t, 5>{0, 1, 2, 1, 2}));
  EXPECT_EQ(s.clarity.shared_samples, 2u);
  EXPECT_EQ(s.clarity.exact_agreement, 0.5);
  EXPECT_EQ(s.clarity.within_one_agreement, 1.0);
  EXPECT_NEAR(*s.relevance.mean, 19.0 / 6.0, 1e-12);
  EXPECT_EQ(s.relevance.median, 3.5);
  EXPECT_EQ(s.relevance.exact_agreement, 0.5);
  EXPECT_EQ(s.relevance.within_one_agreement, 0.5);
  EXPECT_THROW(aggregate_likert({{"s", "r", 0, 3}}), ValidationError);
}

TEST(Corpus, IdentityMeansOne) {
  std::vector<EvalPair> pairs;
  for (int i = 0; i < 6; ++i) pairs.push_back({std::to_string(i), "f(x" + std::to_string(i) + ");", "f(x" + std::to_string(i) + ");"});
  const auto r = evaluate_corpus(pairs);
  ASSERT_TRUE(r.corpus);
  EXPECT_NEAR(r.corpus->bleu, 1.0, 1e-12);
  EXPECT_NEAR(r.corpus->rouge_l.f1, 1.0, 1e-12);
  EXPECT_NEAR(r.corpus->embedding.f1, 1.0, 1e-12);
}

TEST(Corpus, EmptyHasNoMeans) {
  const auto r = evaluate_corpus({});
  EXPECT_FALSE(r.corpus);
  EXPECT_TRUE(to_json(r)["corpus"].is_null());
  EXPECT_NE(render_report(r).find("mean"), std::string::npos);
}

TEST(Corpus, PerPairMatchesSingleCallsAndExcludesFailures) {
  MetricConfig config;
  config.embedder = one_hot_for({"a", "b", "c", "d"});
  config.threads = 3;
  const std::vector<EvalPair> pairs = {
      {"p1", "a b c", "a b"}, {"p2", "d", "a d"}, {"p3", "a z", "a"}, {"p4", "c c", "c"}, {"p5", "b a", "a b"}};
  const auto r = evaluate_corpus(pairs, config);
  ASSERT_EQ(r.per_pair.size(), 5u);
  EXPECT_EQ(r.excluded, 1u);
  ASSERT_TRUE(r.per_pair[2].error);
  double bleu_sum = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto single = score_pair(pairs[i], config);
    EXPECT_EQ(r.per_pair[i].bleu, single.bleu);
    EXPECT_EQ(r.per_pair[i].rouge_l.f1, single.rouge_l.f1);
    if (!single.error) bleu_sum += single.bleu;
  }
  EXPECT_NEAR(r.corpus->bleu, bleu_sum / 4.0, 1e-15);
  EXPECT_EQ(evaluate_corpus(pairs, config).per_pair[4].embedding.f1, r.per_pair[4].embedding.f1);
}

TEST(Corpus, ReadPairs) {
  std::istringstream in("{\"id\":\"a\",\"candidate\":\"x\",\"reference\":\"y\"}\n\n{\"id\":7,\"candidate\":\"\",\"reference\":\"y\"}\n");
  const auto pairs = read_pairs(in);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[1].id, "7");
  std::istringstream bad("{\"id\":1}\n");
  EXPECT_THROW(read_pairs(bad), ValidationError);
}

TEST(Wild, ExportsFirstKEligible) {
  std::vector<ingest::QuestionPost> qs;
  std::map<long long, GeneratedSnippet> results;
  for (int i = 1; i <= 60; ++i) {
    qs.push_back(fixtures::question(i, Language::Python, 1, 0));
    results[i] = {"snippet " + std::to_string(i), "prompt " + std::to_string(i)};
  }
  const auto batch = export_wild_test_batch(qs, results);
  ASSERT_EQ(batch.entries.size(), 50u);
  EXPECT_TRUE(batch.warnings.empty());
  EXPECT_EQ(batch.entries[0].url, "https://stackoverflow.com/questions/1");
  EXPECT_EQ(batch.entries[49].question_id, 50);

  std::stringstream file;
  write_wild_batch(file, batch);
  EXPECT_EQ(read_wild_batch(file), batch.entries);
}

TEST(Wild, ShortfallWarns) {
  std::vector<ingest::QuestionPost> qs = {fixtures::question(1, Language::Java, 1, 0),
                                          fixtures::question(2, Language::Java, 1, 1),
                                          fixtures::question(3, Language::Java, 1, 0),
                                          fixtures::question(4, Language::Java, 1, 0),
                                          fixtures::question(5, Language::Java, 1, 0)};
  std::map<long long, GeneratedSnippet> results = {{1, {"a", "p"}}, {2, {"b", "p"}}, {3, {"c", "p"}}, {4, {"d", "p"}}};
  const auto batch = export_wild_test_batch(qs, results);
  EXPECT_EQ(batch.entries.size(), 3u);
  ASSERT_FALSE(batch.warnings.empty());
  EXPECT_NE(batch.warnings.back().find("only 3"), std::string::npos);
}
